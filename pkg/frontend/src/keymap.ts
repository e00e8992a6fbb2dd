/** Keyboard-first labeling: one key per axis value, derived from the codebook. */

import type { CodebookDoc } from "./api.js";

export interface KeyBinding {
  key: string;
  axis: string;
  value: string;
}

// Per-axis key pools, in codebook axis order. Topics take the digit row so
// all nine fit; the remaining axes sit under the left hand.
const KEY_POOLS = [
  "123456789",
  "qwertyuio",
  "asdfghjkl",
  "zxcvbnm,.",
];

export function buildKeymap(codebook: CodebookDoc): KeyBinding[] {
  const bindings: KeyBinding[] = [];
  codebook.axes.forEach((axis, axisIndex) => {
    const pool = KEY_POOLS[axisIndex % KEY_POOLS.length] ?? "";
    axis.values.forEach((value, valueIndex) => {
      const key = pool[valueIndex];
      if (key !== undefined) {
        bindings.push({ key, axis: axis.name, value });
      }
    });
  });
  return bindings;
}

export function lookupKey(bindings: KeyBinding[], key: string): KeyBinding | undefined {
  return bindings.find((b) => b.key === key.toLowerCase());
}

/** key -> label helper for on-screen hints, grouped by axis. */
export function bindingsByAxis(bindings: KeyBinding[]): Map<string, KeyBinding[]> {
  const grouped = new Map<string, KeyBinding[]>();
  for (const binding of bindings) {
    const bucket = grouped.get(binding.axis) ?? [];
    bucket.push(binding);
    grouped.set(binding.axis, bucket);
  }
  return grouped;
}
