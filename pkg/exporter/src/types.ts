import { z } from "zod";

export type Task = "classification" | "span";

// -- datasets (JSONL, one example per line) --------------------------------

export const classificationExampleSchema = z.object({
  id: z.string().min(1),
  text: z.string(),
  label: z.string().min(1),
});
export type ClassificationExample = z.infer<typeof classificationExampleSchema>;

export const spanExampleSchema = z.object({
  id: z.string().min(1),
  question: z.string(),
  context: z.string(),
  answers: z.array(z.string()).min(1),
});
export type SpanExample = z.infer<typeof spanExampleSchema>;

// -- model interface ---------------------------------------------------------

export interface ClassPrediction {
  /** probabilities over the model's label list; must sum to ~1 */
  probs: number[];
}

export interface SpanPrediction {
  text: string;
  startProb: number;
  endProb: number;
}

export interface ClassificationModel {
  kind: "classification";
  labels: string[];
  predict(texts: string[]): Promise<ClassPrediction[]> | ClassPrediction[];
}

export interface SpanModel {
  kind: "span";
  predict(
    items: { question: string; context: string }[],
  ): Promise<SpanPrediction[]> | SpanPrediction[];
}

export type Model = ClassificationModel | SpanModel;

// -- trace records (the primary engine's file contract) ----------------------

const unit = z.number().min(0).max(1);

export const traceRecordSchema = z
  .object({
    id: z.string().min(1),
    gold_label: z.string().optional(),
    tier1_pred: z.string(),
    tier1_confidence: unit,
    tier1_score: unit.optional(),
    tier2_pred: z.string(),
    tier2_score: unit.optional(),
    tier1_cost: z.number().min(0).optional(),
    tier2_cost: z.number().min(0).optional(),
  })
  .strict();
export type TraceRecord = z.infer<typeof traceRecordSchema>;

export interface TraceMeta {
  dataset?: string;
  metric?: string;
  tier1_model?: string;
  tier2_model?: string;
}

export interface LatencyTableFile {
  kind: "table";
  model: string;
  points: [number, number][];
}
