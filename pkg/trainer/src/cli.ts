#!/usr/bin/env node
/** Trainer command line.
 *
 *   node dist/cli.js train --data data.csv --scaler scaler.json \
 *       --kind peel --out model.json [--seed 0 --epochs 400 ...]
 *   node dist/cli.js cv --data data.csv --scaler scaler.json \
 *       --kind unroll --out cv_report.csv [--group-size 5]
 */

import { writeFileSync } from "node:fs";
import { writeCsv } from "./csv.js";
import { crossValidate, reportCsv } from "./cv.js";
import { loadDataset, loadScaler } from "./data.js";
import { serializeModel } from "./model.js";
import { decisionRows, defaultConfig, trainPeel, trainUnroll } from "./train.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`flag ${arg} needs a value`);
    flags.set(arg.slice(2), value);
    i++;
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const v = flags.get(name);
  if (v === undefined) throw new Error(`missing --${name}`);
  return v;
}

function configFrom(flags: Map<string, string>) {
  return defaultConfig({
    ...(flags.has("epochs") && { epochs: Number(flags.get("epochs")) }),
    ...(flags.has("lr") && { learningRate: Number(flags.get("lr")) }),
    ...(flags.has("weight-decay") && { weightDecay: Number(flags.get("weight-decay")) }),
    ...(flags.has("alpha") && { alpha: Number(flags.get("alpha")) }),
    ...(flags.has("beta") && { beta: Number(flags.get("beta")) }),
    ...(flags.has("group-size") && { groupSize: Number(flags.get("group-size")) }),
    ...(flags.has("seed") && { seed: Number(flags.get("seed")) }),
  });
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "train" && command !== "cv") {
    console.error("usage: trainer {train|cv} --data ... --scaler ... --kind {peel|unroll} --out ...");
    return 1;
  }
  const flags = parseFlags(rest);
  const kind = need(flags, "kind");
  if (kind !== "peel" && kind !== "unroll") throw new Error(`unknown kind ${kind}`);
  const dataset = loadDataset(need(flags, "data"));
  const scaler = loadScaler(need(flags, "scaler"));
  const cfg = configFrom(flags);
  const out = need(flags, "out");

  if (command === "train") {
    const rows = decisionRows(dataset, kind);
    const model =
      kind === "peel"
        ? trainPeel(dataset.featureNames, rows, scaler, cfg)
        : trainUnroll(dataset.featureNames, rows, scaler, cfg);
    writeFileSync(out, serializeModel(model));
    console.log(`trained ${model.kind} on ${rows.length} rows -> ${out}`);
    return 0;
  }

  const reports = crossValidate(dataset, scaler, kind, cfg);
  writeFileSync(out, writeCsv(reportCsv(reports)));
  for (const r of reports) {
    console.log(
      `fold ${r.fold}: eval=[${r.benchmarks.join(", ")}] accuracy=${r.accuracy.toFixed(3)} ` +
      `model/baseline=${(r.estModel / r.estBaseline).toFixed(4)}` +
      (r.degenerate ? " (degenerate: train == eval)" : ""),
    );
  }
  return 0;
}

const isEntry = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isEntry) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}
