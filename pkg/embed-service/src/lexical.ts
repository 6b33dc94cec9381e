// Deterministic hashed term-frequency embedding.
//
// Mirrors the consumer pipeline's builtin backend operation-for-operation
// (same tokenizer, same 64-bit FNV-1a dimension hashing, same accumulation
// and normalization order), so vectors produced here are bit-identical to
// the ones the pipeline computes locally. That keeps retrieval results, and
// therefore recorded prompt fixtures, stable when switching backends.

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

const ALNUM_RUN = /[A-Za-z0-9]+/g;
const CAMEL_BOUNDARY = /(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])/;

export function tokenize(text: string): string[] {
  const tokens: string[] = [];
  for (const run of text.match(ALNUM_RUN) ?? []) {
    for (const part of run.split(CAMEL_BOUNDARY)) {
      if (part) tokens.push(part.toLowerCase());
    }
  }
  return tokens;
}

export function fnv1a64(data: Buffer): bigint {
  let hash = FNV_OFFSET;
  for (const byte of data) {
    hash = ((hash ^ BigInt(byte)) * FNV_PRIME) & MASK64;
  }
  return hash;
}

export function embed(text: string, dim: number): number[] {
  const vec = new Array<number>(dim).fill(0);
  for (const token of tokenize(text)) {
    const index = Number(fnv1a64(Buffer.from(token, "utf8")) % BigInt(dim));
    vec[index] += 1;
  }
  let sumSquares = 0;
  for (const v of vec) {
    sumSquares += v * v;
  }
  const norm = Math.sqrt(sumSquares);
  if (norm === 0) return vec;
  return vec.map((v) => v / norm);
}

export function cosine(a: number[], b: number[]): number {
  let dot = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
  }
  return dot;
}

// Joint relevance score for a (query, candidate) pair. With the lexical
// model this is the cosine of the two hashed vectors; callers treat the
// scores as ordinal only.
export function relevance(query: string, candidate: string, dim: number): number {
  return cosine(embed(query, dim), embed(candidate, dim));
}
