/**
 * Token-level F1 between a predicted answer span and gold answers, using the
 * usual reading-comprehension normalization: lowercase, drop punctuation and
 * articles, split on whitespace. The score against multiple gold answers is
 * the maximum over them.
 */

const ARTICLES = new Set(["a", "an", "the"]);

export function normalizeTokens(text: string): string[] {
  const cleaned = text
    .toLowerCase()
    .replace(/[^\p{L}\p{N}\s]/gu, " ")
    .split(/\s+/)
    .filter((t) => t.length > 0 && !ARTICLES.has(t));
  return cleaned;
}

export function tokenF1(prediction: string, gold: string): number {
  const predTokens = normalizeTokens(prediction);
  const goldTokens = normalizeTokens(gold);
  if (predTokens.length === 0 && goldTokens.length === 0) return 1;
  if (predTokens.length === 0 || goldTokens.length === 0) return 0;
  const goldCounts = new Map<string, number>();
  for (const tok of goldTokens) {
    goldCounts.set(tok, (goldCounts.get(tok) ?? 0) + 1);
  }
  let overlap = 0;
  for (const tok of predTokens) {
    const remaining = goldCounts.get(tok) ?? 0;
    if (remaining > 0) {
      overlap += 1;
      goldCounts.set(tok, remaining - 1);
    }
  }
  if (overlap === 0) return 0;
  const precision = overlap / predTokens.length;
  const recall = overlap / goldTokens.length;
  return (2 * precision * recall) / (precision + recall);
}

export function bestTokenF1(prediction: string, golds: string[]): number {
  return Math.max(...golds.map((g) => tokenF1(prediction, g)));
}
