import type { ClinicalValues, FieldDescriptor } from "./types.js";

const UNKNOWN = "unknown";

/** Midpoint of the chosen bin; always falls inside the half-open bin. */
function binMidpoint(lo: number, hi: number): number {
  return (lo + hi) / 2;
}

interface Control {
  field: FieldDescriptor;
  read(): string | number;
  setDisabled(disabled: boolean): void;
}

function makeBooleanToggle(field: FieldDescriptor, slot: HTMLElement): Control {
  const input = document.createElement("input");
  input.type = "checkbox";
  input.name = field.name;
  slot.appendChild(input);
  return {
    field,
    read: () => (input.checked ? "yes" : "no"),
    setDisabled: (d) => {
      input.disabled = d;
    },
  };
}

function makeSelect(
  field: FieldDescriptor,
  slot: HTMLElement,
  options: Array<{ label: string; value: string }>,
): Control {
  const select = document.createElement("select");
  select.name = field.name;
  for (const option of options) {
    const element = document.createElement("option");
    element.textContent = option.label;
    element.value = option.value;
    select.appendChild(element);
  }
  slot.appendChild(select);
  return {
    field,
    read: () => {
      const raw = select.value;
      if (field.kind === "numeric" && raw !== UNKNOWN) {
        return Number(raw);
      }
      return raw;
    },
    setDisabled: (d) => {
      select.disabled = d;
    },
  };
}

function buildControl(field: FieldDescriptor, slot: HTMLElement): Control {
  if (field.kind === "boolean" && !field.allow_unknown) {
    return makeBooleanToggle(field, slot);
  }
  let options: Array<{ label: string; value: string }>;
  if (field.kind === "boolean") {
    options = [
      { label: "yes", value: "yes" },
      { label: "no", value: "no" },
    ];
  } else if (field.kind === "categorical") {
    options = (field.values ?? []).map((v) => ({ label: v, value: v }));
  } else {
    const bins = field.bins ?? [];
    options = [];
    for (let i = 0; i + 1 < bins.length; i += 1) {
      const lo = bins[i]!;
      const hi = bins[i + 1]!;
      options.push({
        label: field.slots[i] ?? `(${lo}, ${hi}]`,
        value: String(binMidpoint(lo, hi)),
      });
    }
  }
  if (field.allow_unknown) {
    options.push({ label: UNKNOWN, value: UNKNOWN });
  }
  return makeSelect(field, slot, options);
}

/** One control per schema field, in schema order.
 *
 * Booleans render as a two-state toggle, categorical fields as a select
 * over the declared values, numeric fields as a select over the bins
 * (submitting the bin midpoint). Fields allowing unknown get an extra
 * option; a boolean that allows unknown becomes a three-way select.
 * Every control constrains input to admissible values, so reads never
 * produce a value the service would reject as undeclared.
 */
export class ClinicalForm {
  private readonly controls: Control[] = [];

  constructor(container: HTMLElement, fields: FieldDescriptor[]) {
    container.textContent = "";
    for (const field of fields) {
      const row = document.createElement("label");
      row.className = "clinical-field";
      const caption = document.createElement("span");
      caption.className = "clinical-field-name";
      caption.textContent = field.name;
      row.appendChild(caption);
      this.controls.push(buildControl(field, row));
      container.appendChild(row);
    }
  }

  get fieldNames(): string[] {
    return this.controls.map((c) => c.field.name);
  }

  values(): ClinicalValues {
    const out: ClinicalValues = {};
    for (const control of this.controls) {
      out[control.field.name] = control.read();
    }
    return out;
  }

  setDisabled(disabled: boolean): void {
    for (const control of this.controls) {
      control.setDisabled(disabled);
    }
  }
}

export function buildClinicalForm(
  container: HTMLElement,
  fields: FieldDescriptor[],
): ClinicalForm {
  return new ClinicalForm(container, fields);
}
