/**
 * Empirical latency tables: median-of-repetitions batch latency per batch
 * size, written in the engine's LatencyTable file format. Batch sizes that
 * fail (e.g. out of memory) are skipped with a warning rather than
 * aborting the whole table.
 */

import fs from "node:fs";

import { resolveModel } from "./models.js";
import { readJsonl } from "./traceFile.js";
import type { LatencyTableFile } from "./types.js";

export interface LatencyOptions {
  modelRef: string;
  batchSizes: number[];
  repetitions: number;
  outPath: string;
  datasetPath?: string;
  warn?: (message: string) => void;
}

function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

function sampleTexts(datasetPath: string | undefined, count: number): string[] {
  let pool: string[] = [];
  if (datasetPath) {
    pool = readJsonl(datasetPath)
      .map((row) => {
        const r = row as { text?: string; context?: string };
        return r.text ?? r.context ?? "";
      })
      .filter((t) => t.length > 0);
  }
  if (pool.length === 0) {
    pool = ["the quick brown fox jumps over the lazy dog"];
  }
  return Array.from({ length: count }, (_, i) => pool[i % pool.length]);
}

export async function measureLatencyTable(options: LatencyOptions): Promise<LatencyTableFile> {
  if (options.repetitions < 3) {
    throw new Error(`repetitions must be >= 3, got ${options.repetitions}`);
  }
  const sizes = [...new Set(options.batchSizes)].sort((a, b) => a - b);
  if (sizes.length === 0 || sizes[0] < 1) {
    throw new Error("batch sizes must be positive integers");
  }
  const warn = options.warn ?? ((msg: string) => console.error(msg));
  const model = await resolveModel(options.modelRef, ["neg", "pos"]);

  const points: [number, number][] = [];
  for (const size of sizes) {
    const texts = sampleTexts(options.datasetPath, size);
    const inputs =
      model.kind === "span" ? texts.map((t) => ({ question: "q", context: t })) : texts;
    try {
      const run = () => (model.kind === "span" ? model.predict(inputs as never) : model.predict(texts));
      await run(); // warm-up, untimed
      const samples: number[] = [];
      for (let rep = 0; rep < options.repetitions; rep++) {
        const started = process.hrtime.bigint();
        await run();
        samples.push(Number(process.hrtime.bigint() - started) / 1e9);
      }
      points.push([size, median(samples)]);
    } catch (err) {
      warn(`batch size ${size} skipped: ${(err as Error).message}`);
    }
  }
  if (points.length === 0) {
    throw new Error("every batch size failed; no latency table to write");
  }
  const table: LatencyTableFile = { kind: "table", model: options.modelRef, points };
  fs.writeFileSync(options.outPath, JSON.stringify(table, null, 2) + "\n", "utf-8");
  return table;
}
