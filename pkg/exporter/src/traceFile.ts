/**
 * Trace JSONL writing: the file contract with the cascade evaluation engine.
 * Every record is schema-validated before anything is written, so a bad
 * export fails without leaving a partial file behind.
 */

import fs from "node:fs";

import { traceRecordSchema, type TraceMeta, type TraceRecord } from "./types.js";

export function validateRecords(records: TraceRecord[]): void {
  const seen = new Set<string>();
  records.forEach((record, index) => {
    const parsed = traceRecordSchema.safeParse(record);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      throw new Error(
        `record ${index} (${record.id ?? "?"}): ${issue.path.join(".")} ${issue.message}`,
      );
    }
    if (record.gold_label === undefined &&
        (record.tier1_score === undefined || record.tier2_score === undefined)) {
      throw new Error(`record ${record.id}: needs gold_label or both per-instance scores`);
    }
    if (seen.has(record.id)) {
      throw new Error(`duplicate record id ${record.id}`);
    }
    seen.add(record.id);
  });
}

export function writeTraceFile(path: string, records: TraceRecord[], meta: TraceMeta): void {
  validateRecords(records);
  const lines: string[] = [];
  if (Object.values(meta).some((v) => v !== undefined)) {
    lines.push(JSON.stringify({ __meta__: meta }));
  }
  for (const record of records) {
    lines.push(JSON.stringify(record));
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function readJsonl(path: string): unknown[] {
  return fs
    .readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line, i) => {
      try {
        return JSON.parse(line);
      } catch (err) {
        throw new Error(`${path}:${i + 1}: invalid JSON (${(err as Error).message})`);
      }
    });
}
