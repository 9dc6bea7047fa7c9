/**
 * Runs a tier-1/tier-2 model pair over a labeled dataset and builds trace
 * records: tier-1 prediction + confidence (max class probability), tier-2
 * prediction, and per-instance quality scores (correctness for
 * classification, token-level F1 for span tasks). Optionally measures
 * per-instance wall-clock costs at batch size 1.
 */

import { z } from "zod";

import { resolveModel } from "./models.js";
import { bestTokenF1 } from "./tokenF1.js";
import { readJsonl, writeTraceFile } from "./traceFile.js";
import {
  classificationExampleSchema,
  spanExampleSchema,
  type ClassificationExample,
  type ClassificationModel,
  type ClassPrediction,
  type Model,
  type SpanExample,
  type SpanModel,
  type SpanPrediction,
  type Task,
  type TraceRecord,
} from "./types.js";

export interface ExportOptions {
  task: Task;
  datasetPath: string;
  tier1Ref: string;
  tier2Ref: string;
  outPath: string;
  batchSize: number;
  measureCosts: boolean;
  datasetName?: string;
}

export interface ExportSummary {
  records: number;
  metric: string;
  tier1_accuracy: number;
  tier2_accuracy: number;
  out: string;
}

function argmax(probs: number[]): number {
  let best = 0;
  for (let i = 1; i < probs.length; i++) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

function chunk<T>(items: T[], size: number): T[][] {
  const out: T[][] = [];
  for (let i = 0; i < items.length; i += size) {
    out.push(items.slice(i, i + size));
  }
  return out;
}

async function batchedPredict<I, O>(
  inputs: I[],
  batchSize: number,
  run: (batch: I[]) => Promise<O[]> | O[],
): Promise<O[]> {
  const out: O[] = [];
  for (const batch of chunk(inputs, batchSize)) {
    const results = await run(batch);
    if (results.length !== batch.length) {
      throw new Error(`model returned ${results.length} predictions for a batch of ${batch.length}`);
    }
    out.push(...results);
  }
  return out;
}

/** Per-instance wall-clock seconds at batch size 1. */
async function measurePerInstance<I, O>(
  inputs: I[],
  run: (batch: I[]) => Promise<O[]> | O[],
): Promise<{ outputs: O[]; seconds: number[] }> {
  const outputs: O[] = [];
  const seconds: number[] = [];
  for (const input of inputs) {
    const started = process.hrtime.bigint();
    const [result] = await run([input]);
    seconds.push(Number(process.hrtime.bigint() - started) / 1e9);
    outputs.push(result);
  }
  return { outputs, seconds };
}

function parseDataset(task: Task, rows: unknown[]): ClassificationExample[] | SpanExample[] {
  const schema = task === "classification" ? classificationExampleSchema : spanExampleSchema;
  return rows.map((row, i) => {
    const parsed = schema.safeParse(row);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      throw new Error(`dataset row ${i + 1}: ${issue.path.join(".")} ${issue.message}`);
    }
    return parsed.data;
  }) as ClassificationExample[] | SpanExample[];
}

function requireKind<M extends Model>(model: Model, kind: M["kind"], ref: string): M {
  if (model.kind !== kind) {
    throw new Error(`model ${ref} is a ${model.kind} model; this dataset needs ${kind}`);
  }
  return model as M;
}

const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;

export async function exportTrace(options: ExportOptions): Promise<ExportSummary> {
  const rows = readJsonl(options.datasetPath);
  if (rows.length === 0) throw new Error(`dataset ${options.datasetPath} is empty`);

  let records: TraceRecord[];
  let metric: string;
  let tier1Scores: number[];
  let tier2Scores: number[];

  if (options.task === "classification") {
    const examples = parseDataset("classification", rows) as ClassificationExample[];
    const labels = [...new Set(examples.map((e) => e.label))].sort();
    const tier1 = requireKind<ClassificationModel>(
      await resolveModel(options.tier1Ref, labels), "classification", options.tier1Ref);
    const tier2 = requireKind<ClassificationModel>(
      await resolveModel(options.tier2Ref, labels), "classification", options.tier2Ref);

    const texts = examples.map((e) => e.text);
    let preds1: ClassPrediction[];
    let preds2: ClassPrediction[];
    let costs1: number[] | undefined;
    let costs2: number[] | undefined;
    if (options.measureCosts) {
      ({ outputs: preds1, seconds: costs1 } = await measurePerInstance(texts, (b) => tier1.predict(b)));
      ({ outputs: preds2, seconds: costs2 } = await measurePerInstance(texts, (b) => tier2.predict(b)));
    } else {
      preds1 = await batchedPredict(texts, options.batchSize, (b) => tier1.predict(b));
      preds2 = await batchedPredict(texts, options.batchSize, (b) => tier2.predict(b));
    }

    metric = "accuracy";
    tier1Scores = [];
    tier2Scores = [];
    records = examples.map((example, i) => {
      const p1 = preds1[i];
      const p2 = preds2[i];
      const best1 = argmax(p1.probs);
      const pred1 = tier1.labels[best1];
      const pred2 = tier2.labels[argmax(p2.probs)];
      const score1 = pred1 === example.label ? 1 : 0;
      const score2 = pred2 === example.label ? 1 : 0;
      tier1Scores.push(score1);
      tier2Scores.push(score2);
      return {
        id: example.id,
        gold_label: example.label,
        tier1_pred: pred1,
        tier1_confidence: p1.probs[best1],
        tier1_score: score1,
        tier2_pred: pred2,
        tier2_score: score2,
        ...(costs1 ? { tier1_cost: costs1[i] } : {}),
        ...(costs2 ? { tier2_cost: costs2[i] } : {}),
      };
    });
  } else {
    const examples = parseDataset("span", rows) as SpanExample[];
    const tier1 = requireKind<SpanModel>(
      await resolveModel(options.tier1Ref, []), "span", options.tier1Ref);
    const tier2 = requireKind<SpanModel>(
      await resolveModel(options.tier2Ref, []), "span", options.tier2Ref);

    const items = examples.map((e) => ({ question: e.question, context: e.context }));
    let preds1: SpanPrediction[];
    let preds2: SpanPrediction[];
    let costs1: number[] | undefined;
    let costs2: number[] | undefined;
    if (options.measureCosts) {
      ({ outputs: preds1, seconds: costs1 } = await measurePerInstance(items, (b) => tier1.predict(b)));
      ({ outputs: preds2, seconds: costs2 } = await measurePerInstance(items, (b) => tier2.predict(b)));
    } else {
      preds1 = await batchedPredict(items, options.batchSize, (b) => tier1.predict(b));
      preds2 = await batchedPredict(items, options.batchSize, (b) => tier2.predict(b));
    }

    metric = "mean_score";
    tier1Scores = [];
    tier2Scores = [];
    records = examples.map((example, i) => {
      const p1 = preds1[i];
      const p2 = preds2[i];
      const score1 = bestTokenF1(p1.text, example.answers);
      const score2 = bestTokenF1(p2.text, example.answers);
      tier1Scores.push(score1);
      tier2Scores.push(score2);
      return {
        id: example.id,
        tier1_pred: p1.text,
        // span confidence: product of the best start and end probabilities
        tier1_confidence: p1.startProb * p1.endProb,
        tier1_score: score1,
        tier2_pred: p2.text,
        tier2_score: score2,
        ...(costs1 ? { tier1_cost: costs1[i] } : {}),
        ...(costs2 ? { tier2_cost: costs2[i] } : {}),
      };
    });
  }

  writeTraceFile(options.outPath, records, {
    dataset: options.datasetName ?? options.datasetPath,
    metric,
    tier1_model: options.tier1Ref,
    tier2_model: options.tier2Ref,
  });
  return {
    records: records.length,
    metric,
    tier1_accuracy: mean(tier1Scores),
    tier2_accuracy: mean(tier2Scores),
    out: options.outPath,
  };
}

export const exportOptionsSchema = z.object({
  task: z.enum(["classification", "span"]),
  datasetPath: z.string(),
  tier1Ref: z.string(),
  tier2Ref: z.string(),
  outPath: z.string(),
  batchSize: z.number().int().min(1),
  measureCosts: z.boolean(),
  datasetName: z.string().optional(),
});
