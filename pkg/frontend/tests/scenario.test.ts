import { describe, expect, it } from "vitest";

import { ScenarioStore, validateDraft } from "../src/scenario.js";
import { ELEMENTS, GESTURES, mulberry32, testSchema } from "./helpers.js";

function freshStore(): ScenarioStore {
  return new ScenarioStore(testSchema());
}

function checkConsistent(store: ScenarioStore): void {
  const vector = store.asRequest();
  expect(validateDraft(vector, store.elementFeatures, store.gestureFeatures)).toEqual([]);
}

describe("ScenarioStore", () => {
  it("partitions the schema columns into control groups", () => {
    const store = freshStore();
    expect(store.elementFeatures).toEqual(ELEMENTS);
    expect(store.gestureFeatures).toEqual(GESTURES);
    expect(store.scalarFeatures).toEqual(["d_avg", "v_avg", "theta_avg"]);
    expect(store.flagFeatures).toEqual(["a_acc", "a_sa"]);
  });

  it("starts from a consistent all-zero draft", () => {
    const store = freshStore();
    expect(store.get("N")).toBe(0);
    checkConsistent(store);
  });

  it("recomputes N and grows a gesture when an element count rises", () => {
    const store = freshStore();
    store.setElementCount("n_List", 3);
    expect(store.get("n_List")).toBe(3);
    expect(store.get("N")).toBe(3);
    expect(store.get("n_Tap")).toBe(3); // absorber takes the slack
    checkConsistent(store);
  });

  it("spills gesture reduction past the absorber when it hits zero", () => {
    const store = freshStore();
    store.setElementCount("n_Button", 6); // N=6, n_Tap=6
    store.setGestureCount("n_Drag", 4); //  n_Tap=2, n_Drag=4
    store.setGestureCount("n_Multitouch", 5); // needs -5 elsewhere: tap 2->0, drag 4->1
    expect(store.get("n_Tap")).toBe(0);
    expect(store.get("n_Drag")).toBe(1);
    expect(store.get("n_Multitouch")).toBe(5);
    checkConsistent(store);
  });

  it("clamps gesture edits to [0, N]", () => {
    const store = freshStore();
    store.setElementCount("n_Keyboard", 2);
    store.setGestureCount("n_Drag", 99);
    expect(store.get("n_Drag")).toBe(2);
    store.setGestureCount("n_Drag", -5);
    expect(store.get("n_Drag")).toBe(0);
    checkConsistent(store);
  });

  it("keeps gestures consistent when an element count drops", () => {
    const store = freshStore();
    store.setElementCount("n_Button", 4);
    store.setElementCount("n_List", 3); // N=7, all tap
    store.setGestureCount("n_Multitouch", 7); // tap 0, multi 7
    store.setElementCount("n_Button", 0); // N=3: multi must give back 4 via spill
    expect(store.get("N")).toBe(3);
    checkConsistent(store);
  });

  it("ignores junk and clamps negatives on count inputs", () => {
    const store = freshStore();
    store.setElementCount("n_List", Number.NaN);
    expect(store.get("n_List")).toBe(0);
    store.setElementCount("n_List", -7);
    expect(store.get("n_List")).toBe(0);
    store.setElementCount("n_List", 2.7); // typed decimals round to a count
    expect(store.get("n_List")).toBe(3);
    checkConsistent(store);
  });

  it("clamps continuous fields to the advertised training range", () => {
    const store = freshStore();
    store.setScalar("v_avg", 9001);
    expect(store.get("v_avg")).toBe(130);
    store.setScalar("theta_avg", -77);
    expect(store.get("theta_avg")).toBe(-4.5);
    store.setScalar("d_avg", 450.25);
    expect(store.get("d_avg")).toBe(450.25);
    checkConsistent(store);
  });

  it("stores flags as 0/1", () => {
    const store = freshStore();
    store.setFlag("a_acc", true);
    expect(store.get("a_acc")).toBe(1);
    store.setFlag("a_acc", false);
    expect(store.get("a_acc")).toBe(0);
    checkConsistent(store);
  });

  it("serializes integer columns as integers", () => {
    const store = freshStore();
    store.setElementCount("n_Button", 5);
    store.setScalar("d_avg", 123.75);
    const vector = store.asRequest();
    for (const name of testSchema().integer_features) {
      expect(Number.isInteger(vector[name]), name).toBe(true);
    }
    expect(vector["d_avg"]).toBe(123.75);
  });

  it("notifies subscribers once per edit and supports unsubscribe", () => {
    const store = freshStore();
    let seen = 0;
    const off = store.subscribe(() => {
      seen += 1;
    });
    store.setElementCount("n_List", 1);
    store.setFlag("a_sa", true);
    expect(seen).toBe(2);
    off();
    store.setElementCount("n_List", 2);
    expect(seen).toBe(2);
  });

  it("stays consistent through a randomized edit storm", () => {
    const rand = mulberry32(2024);
    const store = freshStore();
    const pick = <T>(xs: readonly T[]): T => xs[Math.floor(rand() * xs.length)]!;
    for (let step = 0; step < 2000; step++) {
      const kind = rand();
      if (kind < 0.4) {
        store.setElementCount(pick(store.elementFeatures), Math.floor(rand() * 19) - 3);
      } else if (kind < 0.7) {
        store.setGestureCount(pick(store.gestureFeatures), Math.floor(rand() * 25) - 5);
      } else if (kind < 0.9) {
        store.setScalar(pick(store.scalarFeatures), (rand() - 0.3) * 2000);
      } else {
        store.setFlag(pick(store.flagFeatures), rand() < 0.5);
      }
      checkConsistent(store);
    }
  });
});

describe("validateDraft", () => {
  it("flags drafts whose counts disagree with N", () => {
    const vector = { n_Button: 2, n_Tap: 1, N: 2 };
    const issues = validateDraft(vector, ["n_Button"], ["n_Tap"]);
    expect(issues.some((i) => i.field === "N")).toBe(true);
  });

  it("flags out-of-range speed and non-binary flags", () => {
    const issues = validateDraft({ v_avg: 400, a_acc: 2, N: 0 }, [], []);
    expect(issues.map((i) => i.field)).toContain("v_avg");
    expect(issues.map((i) => i.field)).toContain("a_acc");
  });
});
