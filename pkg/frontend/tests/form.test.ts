import { beforeEach, describe, expect, it } from "vitest";

import { buildClinicalForm } from "../src/form.js";
import type { FieldDescriptor } from "../src/types.js";

const FIELDS: FieldDescriptor[] = [
  { name: "gender", kind: "categorical", values: ["M", "F"],
    slots: ["M", "F"] },
  { name: "smoker", kind: "boolean", slots: ["smoker"] },
  { name: "age", kind: "numeric", bins: [0, 40, 60, 120],
    slots: ["(0, 40]", "(40, 60]", "(60, 120]"] },
];

let container: HTMLElement;

beforeEach(() => {
  container = document.createElement("div");
});

describe("buildClinicalForm", () => {
  it("renders one control per field in schema order", () => {
    buildClinicalForm(container, FIELDS);
    const rows = container.querySelectorAll(".clinical-field");
    expect(rows.length).toBe(3);
    const names = [...rows].map(
      (row) => row.querySelector(".clinical-field-name")?.textContent,
    );
    expect(names).toEqual(["gender", "smoker", "age"]);
  });

  it("maps kinds onto control types", () => {
    buildClinicalForm(container, FIELDS);
    expect(container.querySelector("select[name=gender]")).not.toBeNull();
    expect(
      container.querySelector("input[name=smoker][type=checkbox]"),
    ).not.toBeNull();
    expect(container.querySelector("select[name=age]")).not.toBeNull();
  });

  it("offers bin labels as numeric options", () => {
    buildClinicalForm(container, FIELDS);
    const age = container.querySelector<HTMLSelectElement>(
      "select[name=age]",
    )!;
    const labels = [...age.options].map((o) => o.textContent);
    expect(labels).toEqual(["(0, 40]", "(40, 60]", "(60, 120]"]);
  });

  it("reads defaults: first option, unchecked toggle means no", () => {
    const form = buildClinicalForm(container, FIELDS);
    expect(form.values()).toEqual({ gender: "M", smoker: "no", age: 20 });
  });

  it("reads edited values; numeric reads as the bin midpoint", () => {
    const form = buildClinicalForm(container, FIELDS);
    container.querySelector<HTMLSelectElement>(
      "select[name=gender]",
    )!.value = "F";
    container.querySelector<HTMLInputElement>(
      "input[name=smoker]",
    )!.checked = true;
    const age = container.querySelector<HTMLSelectElement>(
      "select[name=age]",
    )!;
    age.selectedIndex = 1;
    expect(form.values()).toEqual({ gender: "F", smoker: "yes", age: 50 });
  });

  it("adds an unknown option when the field allows it", () => {
    const form = buildClinicalForm(container, [
      { name: "stage", kind: "categorical", values: ["I", "II"],
        allow_unknown: true, slots: ["I", "II", "unknown"] },
      { name: "drinker", kind: "boolean", allow_unknown: true,
        slots: ["drinker", "unknown"] },
    ]);
    const stage = container.querySelector<HTMLSelectElement>(
      "select[name=stage]",
    )!;
    expect([...stage.options].map((o) => o.value))
      .toEqual(["I", "II", "unknown"]);
    const drinker = container.querySelector<HTMLSelectElement>(
      "select[name=drinker]",
    )!;
    expect([...drinker.options].map((o) => o.value))
      .toEqual(["yes", "no", "unknown"]);
    stage.value = "unknown";
    drinker.value = "unknown";
    expect(form.values()).toEqual({ stage: "unknown", drinker: "unknown" });
  });

  it("disables and re-enables every control", () => {
    const form = buildClinicalForm(container, FIELDS);
    form.setDisabled(true);
    const controls = container.querySelectorAll<HTMLInputElement>(
      "select, input",
    );
    expect([...controls].every((c) => c.disabled)).toBe(true);
    form.setDisabled(false);
    expect([...controls].every((c) => !c.disabled)).toBe(true);
  });

  it("rebuilds cleanly into a used container", () => {
    buildClinicalForm(container, FIELDS);
    const form = buildClinicalForm(container, FIELDS.slice(0, 1));
    expect(container.querySelectorAll(".clinical-field").length).toBe(1);
    expect(form.fieldNames).toEqual(["gender"]);
  });
});
