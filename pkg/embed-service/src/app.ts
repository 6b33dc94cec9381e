import express, { Express, Request, Response } from "express";

import { embed, relevance } from "./lexical";

export interface ServiceConfig {
  dim: number;
  embeddingModel: string;
  rerankModel: string;
}

export function configFromEnv(): ServiceConfig {
  return {
    dim: Number(process.env.EMBED_DIM ?? 256),
    embeddingModel: process.env.MODEL_NAME ?? `hashed-lexical-${process.env.EMBED_DIM ?? 256}`,
    rerankModel: process.env.RERANK_MODEL_NAME ?? "hashed-lexical-cosine",
  };
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((item) => typeof item === "string");
}

export function createApp(config: ServiceConfig): Express {
  const app = express();
  app.use(express.json({ limit: "5mb" }));
  let ready = false;

  app.get("/health", (_req: Request, res: Response) => {
    if (!ready) {
      res.status(503).json({ status: "loading" });
      return;
    }
    res.json({
      status: "ok",
      embedding_model: config.embeddingModel,
      rerank_model: config.rerankModel,
      dim: config.dim,
    });
  });

  app.post("/embed", (req: Request, res: Response) => {
    if (!ready) {
      res.status(503).json({ error: "model is still loading" });
      return;
    }
    const texts = (req.body ?? {}).texts;
    if (!isStringArray(texts)) {
      res.status(400).json({ error: "body must be {\"texts\": [string, ...]}" });
      return;
    }
    res.json({
      vectors: texts.map((text) => embed(text, config.dim)),
      dim: config.dim,
    });
  });

  app.post("/rerank", (req: Request, res: Response) => {
    if (!ready) {
      res.status(503).json({ error: "model is still loading" });
      return;
    }
    const { query, candidates } = req.body ?? {};
    if (typeof query !== "string" || !isStringArray(candidates)) {
      res.status(400).json({
        error: "body must be {\"query\": string, \"candidates\": [string, ...]}",
      });
      return;
    }
    res.json({
      scores: candidates.map((candidate) => relevance(query, candidate, config.dim)),
    });
  });

  // The lexical model has nothing to load; flip readiness once the routes
  // exist so the 503 path stays exercised only during startup races.
  ready = true;
  return app;
}
