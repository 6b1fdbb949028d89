/**
 * Page shell: what-if editor on the left, live predictions and force
 * plots on the right, plus lazily loaded global-importance and
 * dependence tabs.
 *
 * Every number on screen comes from a service response — the client
 * clamps inputs and draws, nothing more. Network failures raise a
 * banner with a retry; validation failures land next to the offending
 * field.
 */

import {
  ApiClient,
  ExplainResponse,
  FeatureSchema,
  GlobalResponse,
  NetworkError,
  ServiceUnavailableError,
  ValidationError,
} from "./api.js";
import { renderBeeswarm } from "./beeswarm.js";
import { renderDependence } from "./dependence.js";
import { clear, el, fmtNum } from "./dom.js";
import { ExplainLoop } from "./explainLoop.js";
import { ScenarioStore } from "./scenario.js";
import { renderForce } from "./force.js";

type TabName = "whatif" | "global" | "dependence";

const TABS: { name: TabName; label: string }[] = [
  { name: "whatif", label: "What-if" },
  { name: "global", label: "Global importance" },
  { name: "dependence", label: "Dependence" },
];

export class App {
  private store: ScenarioStore | null = null;
  private loop: ExplainLoop | null = null;
  private schemaData: FeatureSchema | null = null;

  private banner!: HTMLElement;
  private versionEl!: HTMLElement;
  private panels!: Record<TabName, HTMLElement>;
  private results!: HTMLElement;

  private readonly inputs = new Map<string, HTMLInputElement>();
  private readonly errorSlots = new Map<string, HTMLElement>();

  private globalLoaded = false;
  private globalToken = 0;
  private depToken = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.renderShell();
    await this.loadSchema();
  }

  // ------------------------------------------------------------ shell

  private renderShell(): void {
    clear(this.root);
    this.banner = el("div", { id: "banner", class: "banner", hidden: "" });
    this.versionEl = el("span", { id: "model-version", class: "model-version" });

    const nav = el("nav", { class: "tabs" });
    for (const tab of TABS) {
      const btn = el("button", { "data-tab": tab.name, type: "button" }, tab.label);
      btn.addEventListener("click", () => this.selectTab(tab.name));
      nav.append(btn);
    }

    this.panels = {
      whatif: el("section", { id: "panel-whatif", class: "panel" }),
      global: el("section", { id: "panel-global", class: "panel", hidden: "" }),
      dependence: el("section", { id: "panel-dependence", class: "panel", hidden: "" }),
    };

    this.root.append(
      el(
        "header",
        { class: "topbar" },
        el("h1", {}, "glancelab explorer"),
        this.versionEl,
      ),
      this.banner,
      nav,
      this.panels.whatif,
      this.panels.global,
      this.panels.dependence,
    );
    this.markTab("whatif");
  }

  private selectTab(name: TabName): void {
    for (const tab of TABS) {
      const panel = this.panels[tab.name];
      if (tab.name === name) panel.removeAttribute("hidden");
      else panel.setAttribute("hidden", "");
    }
    this.markTab(name);
    if (name === "global" && !this.globalLoaded) void this.loadGlobal();
    if (name === "dependence" && this.panels.dependence.childElementCount === 0) {
      this.buildDependencePanel();
    }
  }

  private markTab(name: TabName): void {
    this.root.querySelectorAll<HTMLButtonElement>(".tabs button").forEach((btn) => {
      btn.classList.toggle("active", btn.dataset.tab === name);
    });
  }

  // ----------------------------------------------------------- schema

  private async loadSchema(): Promise<void> {
    try {
      const schema = await this.client.schema();
      this.hideBanner();
      this.schemaData = schema;
      this.versionEl.textContent = `models ${schema.model_version}`;
      this.buildWhatIf(schema);
    } catch (err) {
      this.showErrorBanner(err, () => void this.loadSchema());
    }
  }

  // ----------------------------------------------------- what-if panel

  private buildWhatIf(schema: FeatureSchema): void {
    const store = new ScenarioStore(schema);
    this.store = store;
    this.loop = new ExplainLoop({
      client: this.client,
      onResult: (resp) => this.renderExplain(resp),
      onError: (err) => this.handleExplainError(err),
    });

    const controls = el("div", { class: "controls" });
    controls.append(
      this.countSection("Interface elements", store.elementFeatures, (name, v) =>
        store.setElementCount(name, v),
      ),
      this.gestureSection(store),
      this.drivingSection(store),
      this.generalErrorSlot(),
    );

    this.results = el("div", { class: "results stale" });
    this.results.append(
      el(
        "div",
        { class: "cards" },
        el(
          "div",
          { class: "card" },
          el("span", { id: "prob-value", class: "card-value" }, "—"),
          el("span", { class: "card-caption" }, "long-glance probability"),
        ),
        el(
          "div",
          { class: "card" },
          el("span", { id: "tgd-value", class: "card-value" }, "—"),
          el("span", { class: "card-caption" }, "predicted total glance duration"),
        ),
      ),
      el("div", { class: "force-box force-cls" }),
      el("div", { class: "force-box force-reg" }),
    );

    clear(this.panels.whatif);
    this.panels.whatif.append(controls, this.results);

    store.subscribe(() => {
      this.refreshControls();
      this.scheduleExplain();
    });
    this.scheduleExplain();
  }

  private countSection(
    title: string,
    names: readonly string[],
    apply: (name: string, value: number) => void,
  ): HTMLElement {
    const section = el("fieldset", { class: "control-section" },
      el("legend", {}, title));
    for (const name of names) section.append(this.stepperRow(name, apply));
    return section;
  }

  private gestureSection(store: ScenarioStore): HTMLElement {
    const section = el("fieldset", { class: "control-section" },
      el("legend", {}, "Gestures"));
    section.append(
      el(
        "div",
        { class: "n-chip" },
        "N = ",
        el("span", { id: "n-total" }, "0"),
        el("span", { class: "hint" }, " (recomputed from element counts)"),
      ),
    );
    for (const name of store.gestureFeatures) {
      section.append(this.stepperRow(name, (n, v) => store.setGestureCount(n, v)));
    }
    return section;
  }

  private drivingSection(store: ScenarioStore): HTMLElement {
    const section = el("fieldset", { class: "control-section" },
      el("legend", {}, "Driving context"));
    for (const name of store.scalarFeatures) section.append(this.sliderRow(store, name));
    for (const name of store.flagFeatures) section.append(this.flagRow(store, name));
    return section;
  }

  private stepperRow(
    name: string,
    apply: (name: string, value: number) => void,
  ): HTMLElement {
    const input = el("input", {
      id: `ctl-${name}`,
      type: "number",
      min: "0",
      step: "1",
      value: "0",
    });
    this.inputs.set(name, input);
    const down = el("button", { type: "button", class: "step-down" }, "−");
    const up = el("button", { type: "button", class: "step-up" }, "+");
    down.addEventListener("click", () => apply(name, this.currentValue(name) - 1));
    up.addEventListener("click", () => apply(name, this.currentValue(name) + 1));
    input.addEventListener("change", () => apply(name, Number(input.value)));
    return el(
      "div",
      { class: "row stepper", "data-field": name },
      el("label", { for: `ctl-${name}` }, name),
      down,
      input,
      up,
      this.errorSlot(name),
    );
  }

  private sliderRow(store: ScenarioStore, name: string): HTMLElement {
    const range = store.range(name);
    const span = range.max - range.min;
    const slider = el("input", {
      id: `ctl-${name}`,
      type: "range",
      min: String(range.min),
      max: String(range.max),
      step: String(span > 0 ? span / 200 : 1),
      value: String(store.get(name)),
    });
    if (!(span > 0)) slider.setAttribute("disabled", "");
    const box = el("input", {
      id: `num-${name}`,
      type: "number",
      step: "any",
      value: String(store.get(name)),
    });
    this.inputs.set(name, box);
    slider.addEventListener("input", () => store.setScalar(name, Number(slider.value)));
    box.addEventListener("change", () => store.setScalar(name, Number(box.value)));
    const row = el(
      "div",
      { class: "row slider", "data-field": name },
      el("label", { for: `ctl-${name}` }, name),
      slider,
      box,
      el("span", { class: "hint" }, `${fmtNum(range.min)} – ${fmtNum(range.max)}`),
      this.errorSlot(name),
    );
    // keep the paired slider in sync through the store subscription
    store.subscribe(() => {
      slider.value = String(store.get(name));
    });
    return row;
  }

  private flagRow(store: ScenarioStore, name: string): HTMLElement {
    const box = el("input", { id: `ctl-${name}`, type: "checkbox" });
    box.addEventListener("change", () => store.setFlag(name, box.checked));
    return el(
      "div",
      { class: "row flag", "data-field": name },
      el("label", { for: `ctl-${name}` }, name),
      box,
      this.errorSlot(name),
    );
  }

  private errorSlot(name: string): HTMLElement {
    const slot = el("span", { class: "field-error", "data-for": name, hidden: "" });
    this.errorSlots.set(name, slot);
    return slot;
  }

  private generalErrorSlot(): HTMLElement {
    const slot = el("div", { class: "field-error general", "data-for": "", hidden: "" });
    this.errorSlots.set("", slot);
    return slot;
  }

  private currentValue(name: string): number {
    return this.store?.get(name) ?? 0;
  }

  private refreshControls(): void {
    const store = this.store;
    if (!store) return;
    for (const [name, input] of this.inputs) {
      if (input.type === "checkbox") {
        input.checked = store.get(name) === 1;
      } else if (document.activeElement !== input) {
        input.value = String(store.get(name));
      }
    }
    const nTotal = this.root.querySelector("#n-total");
    if (nTotal) nTotal.textContent = String(store.get("N"));
  }

  // -------------------------------------------------- explain round trip

  private scheduleExplain(): void {
    const store = this.store;
    const loop = this.loop;
    if (!store || !loop) return;
    this.clearFieldErrors();
    const issues = store.issues();
    if (issues.length > 0) {
      // the store should make this unreachable; surface it rather than
      // sending a request the service will reject
      for (const issue of issues) this.setFieldError(issue.field, issue.message);
      return;
    }
    this.results.classList.add("stale");
    loop.schedule(store.asRequest());
  }

  private renderExplain(resp: ExplainResponse): void {
    this.hideBanner();
    this.clearFieldErrors();
    this.results.classList.remove("stale");

    const prob = this.root.querySelector("#prob-value");
    if (prob) prob.textContent = fmtNum(resp.prediction.long_glance_probability);
    const tgd = this.root.querySelector("#tgd-value");
    if (tgd) tgd.textContent = `${resp.prediction.tgd_ms} ms`;
    this.versionEl.textContent = `models ${resp.prediction.model_version}`;

    const clsBox = this.root.querySelector<HTMLElement>(".force-cls");
    if (clsBox) {
      renderForce(clsBox, resp.classification, { title: "long-glance probability" });
    }
    const regBox = this.root.querySelector<HTMLElement>(".force-reg");
    if (regBox) {
      renderForce(regBox, resp.regression, { title: "total glance duration (ms)" });
    }
  }

  private handleExplainError(err: unknown): void {
    if (err instanceof ValidationError) {
      this.clearFieldErrors();
      for (const issue of err.issues) this.setFieldError(issue.field, issue.message);
      return;
    }
    this.showErrorBanner(err, () => this.loop?.retry());
  }

  // ------------------------------------------------------- global panel

  private async loadGlobal(): Promise<void> {
    const token = ++this.globalToken;
    const panel = this.panels.global;
    clear(panel);
    panel.append(el("p", { class: "loading" }, "Loading global importance…"));
    let resp: GlobalResponse;
    try {
      resp = await this.client.global();
    } catch (err) {
      if (token !== this.globalToken) return;
      clear(panel);
      const retry = el("button", { type: "button" }, "Retry");
      retry.addEventListener("click", () => void this.loadGlobal());
      panel.append(el("p", { class: "error" }, describe(err)), retry);
      return;
    }
    if (token !== this.globalToken) return;
    this.globalLoaded = true;
    clear(panel);
    panel.append(
      this.globalSection("Long-glance classifier", resp.classification),
      this.globalSection("Total glance duration", resp.regression),
    );
  }

  private globalSection(
    title: string,
    block: GlobalResponse["classification"],
  ): HTMLElement {
    const section = el("section", { class: "global-section" },
      el("h2", {}, title));
    if (block === null) {
      section.append(
        el("p", { class: "empty-state" },
          "No explained sample loaded for this model."),
      );
    } else {
      const box = el("div", { class: "beeswarm-box" });
      renderBeeswarm(box, block);
      section.append(
        el("p", { class: "hint" },
          `${block.n_instances} explained instances, base value ${fmtNum(block.base_value)}`),
        box,
      );
    }
    return section;
  }

  // --------------------------------------------------- dependence panel

  private buildDependencePanel(): void {
    const panel = this.panels.dependence;
    clear(panel);
    const select = el("select", { id: "dep-feature" });
    for (const name of this.schemaData?.feature_names ?? []) {
      select.append(el("option", { value: name }, name));
    }
    select.addEventListener("change", () => void this.loadDependence(select.value));
    panel.append(
      el("div", { class: "dep-picker" }, el("label", { for: "dep-feature" }, "feature "), select),
      el("div", { id: "dep-content" }),
    );
    const first = this.schemaData?.feature_names[0];
    if (first) void this.loadDependence(first);
  }

  private async loadDependence(feature: string): Promise<void> {
    const token = ++this.depToken;
    const content = this.panels.dependence.querySelector<HTMLElement>("#dep-content");
    if (!content) return;
    clear(content);
    content.append(el("p", { class: "loading" }, `Loading dependence for ${feature}…`));
    try {
      const resp = await this.client.dependence(feature);
      if (token !== this.depToken) return; // superseded by a newer pick
      clear(content);
      for (const [title, block] of [
        ["Long-glance classifier", resp.classification],
        ["Total glance duration", resp.regression],
      ] as const) {
        const section = el("section", { class: "dep-section" }, el("h2", {}, title));
        if (block === null) {
          section.append(
            el("p", { class: "empty-state" },
              "No explained sample loaded for this model."),
          );
        } else {
          const box = el("div", { class: "dependence-box" });
          renderDependence(box, block);
          section.append(box);
        }
        content.append(section);
      }
    } catch (err) {
      if (token !== this.depToken) return;
      clear(content);
      const retry = el("button", { type: "button" }, "Retry");
      retry.addEventListener("click", () => void this.loadDependence(feature));
      content.append(el("p", { class: "error" }, describe(err)), retry);
    }
  }

  // ------------------------------------------------------------ banner

  private showErrorBanner(err: unknown, retry: () => void): void {
    const btn = el("button", { type: "button", class: "retry" }, "Retry");
    btn.addEventListener("click", retry);
    clear(this.banner);
    this.banner.append(el("span", {}, describe(err)), btn);
    this.banner.removeAttribute("hidden");
  }

  private hideBanner(): void {
    this.banner.setAttribute("hidden", "");
  }

  private clearFieldErrors(): void {
    for (const slot of this.errorSlots.values()) {
      slot.textContent = "";
      slot.setAttribute("hidden", "");
    }
  }

  private setFieldError(field: string, message: string): void {
    const slot = this.errorSlots.get(field) ?? this.errorSlots.get("");
    if (!slot) return;
    slot.textContent = slot.textContent ? `${slot.textContent}; ${message}` : message;
    slot.removeAttribute("hidden");
  }
}

function describe(err: unknown): string {
  if (err instanceof NetworkError) {
    return "Cannot reach the prediction service — is it running?";
  }
  if (err instanceof ServiceUnavailableError) {
    return "The service has no models loaded yet.";
  }
  if (err instanceof Error) return err.message;
  return String(err);
}
