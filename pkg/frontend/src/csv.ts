/** Reading and validation of the sweep result CSVs. */

export const RESULT_HEADER = [
  "graph_type", "n", "k", "seed", "model", "train_samples",
  "adapt_samples", "adapt_method", "step", "metric", "value",
] as const;

export interface ResultRow {
  graph_type: string;
  n: number;
  k: number;
  seed: number;
  model: string;
  /** empty string when not applicable (bounds rows) */
  train_samples: string;
  adapt_samples: string;
  adapt_method: string;
  step: string;
  metric: string;
  value: number;
}

export class SchemaError extends Error {}

/** Minimal CSV split; the writer never quotes, so a plain split is exact. */
function splitLine(line: string): string[] {
  return line.split(",");
}

export function parseResultsCsv(text: string): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const header = splitLine(lines[0]);
  if (header.join(",") !== RESULT_HEADER.join(",")) {
    throw new SchemaError(
      `unexpected header: got "${lines[0]}", want "${RESULT_HEADER.join(",")}"`,
    );
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = splitLine(lines[i]);
    if (parts.length !== RESULT_HEADER.length) {
      throw new SchemaError(`row ${i + 1} has ${parts.length} fields, want ${RESULT_HEADER.length}`);
    }
    const value = Number(parts[10]);
    rows.push({
      graph_type: parts[0],
      n: Number(parts[1]),
      k: Number(parts[2]),
      seed: Number(parts[3]),
      model: parts[4],
      train_samples: parts[5],
      adapt_samples: parts[6],
      adapt_method: parts[7],
      step: parts[8],
      metric: parts[9],
      value,
    });
  }
  return rows;
}

export const MODEL_LABELS: Record<string, string> = {
  pseudo_ll: "Pseudo-LL",
  maml: "MAML",
  exp_causal: "EXP-Causal",
  exp_anticausal: "EXP-AntiCausal",
  exp_skeleton: "EXP-Skeleton",
  l_causal: "L-Causal",
  bound_zero_shot: "Bound-ZeroShot",
  bound_adaptation: "Bound-Adaptation",
};

export function modelLabel(model: string): string {
  return MODEL_LABELS[model] ?? model;
}
