/** Client-side mirror of the server's codebook validation.
 *
 * The rules are data-driven from the /v1/codebook payload, so the client
 * blocks exactly the combinations the server would reject.
 */

import type { CodebookDoc, Violation } from "./api.js";

/** axis name -> selected value; null means "absent", undefined means "not chosen yet". */
export type Selection = Record<string, string | null | undefined>;

export function emptySelection(codebook: CodebookDoc): Selection {
  const selection: Selection = {};
  for (const axis of codebook.axes) {
    selection[axis.name] = undefined;
  }
  return selection;
}

/** Mirrors the server: unknown values, constraint requirements, missing values. */
export function validateSelection(selection: Selection, codebook: CodebookDoc): Violation[] {
  const violations: Violation[] = [];
  for (const axis of codebook.axes) {
    const value = selection[axis.name];
    if (value != null && !axis.values.includes(value)) {
      violations.push({ axis: axis.name, message: `unknown value '${value}'` });
    }
  }
  const absentAllowed = new Set<string>();
  for (const rule of codebook.constraints) {
    if (selection[rule.when.axis] !== rule.when.value) {
      continue;
    }
    for (const [name, required] of Object.entries(rule.require)) {
      if (required === null) {
        absentAllowed.add(name);
      }
      const actual = selection[name] ?? null;
      if (actual !== required) {
        const what = required === null ? "be absent" : `be '${required}'`;
        violations.push({
          axis: name,
          message: `must ${what} when ${rule.when.axis}=${rule.when.value}`,
        });
      }
    }
  }
  for (const axis of codebook.axes) {
    if (selection[axis.name] == null && !absentAllowed.has(axis.name)) {
      violations.push({ axis: axis.name, message: "missing value" });
    }
  }
  return violations;
}

/**
 * Values forced by constraints once `axis` is set to `value`; lets the UI
 * auto-fill (e.g. marking a post irrelevant clears the topic and sets both
 * support axes) without hard-coding any rule.
 */
export function constraintFills(
  axis: string,
  value: string,
  codebook: CodebookDoc,
): Record<string, string | null> {
  const fills: Record<string, string | null> = {};
  for (const rule of codebook.constraints) {
    if (rule.when.axis === axis && rule.when.value === value) {
      Object.assign(fills, rule.require);
    }
  }
  return fills;
}

export function definitionFor(codebook: CodebookDoc, axisName: string): Record<string, string> {
  const axis = codebook.axes.find((a) => a.name === axisName);
  return axis ? axis.definitions : {};
}
