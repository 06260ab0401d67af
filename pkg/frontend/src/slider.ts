const DEFAULT_MIN = 0.5;
const UNLOCKED_MIN = 0.0;
const MAX = 1.0;

/** Image-weight slider, debounced.
 *
 * The default range is [0.5, 1.0]; the override toggle widens it to
 * [0, 1]. Dragging fires one trailing onChange per quiet period, so a
 * rapid drag collapses to a single re-query with the final value.
 */
export class WeightSlider {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly input: HTMLInputElement,
    overrideToggle: HTMLInputElement,
    private readonly onChange: (wImage: number) => void,
    private readonly debounceMs = 150,
  ) {
    input.type = "range";
    input.min = String(DEFAULT_MIN);
    input.max = String(MAX);
    input.step = "0.01";
    if (input.value === "" || Number.isNaN(Number(input.value))) {
      input.value = String(DEFAULT_MIN);
    }
    this.clamp();

    input.addEventListener("input", () => this.schedule());
    overrideToggle.addEventListener("change", () => {
      input.min = overrideToggle.checked
        ? String(UNLOCKED_MIN)
        : String(DEFAULT_MIN);
      if (this.clamp()) {
        this.schedule();
      }
    });
  }

  get value(): number {
    return Number(this.input.value);
  }

  set value(wImage: number) {
    this.input.value = String(wImage);
    this.clamp();
    this.schedule();
  }

  /** Pull the value back inside the active range; true when it moved. */
  private clamp(): boolean {
    const low = Number(this.input.min);
    const current = Number(this.input.value);
    const bounded = Math.min(Math.max(current, low), MAX);
    if (bounded !== current) {
      this.input.value = String(bounded);
      return true;
    }
    return false;
  }

  private schedule(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      this.onChange(this.value);
    }, this.debounceMs);
  }
}
