import { configFromEnv, createApp } from "./app";

const port = Number(process.env.PORT ?? 8192);
const config = configFromEnv();

createApp(config).listen(port, () => {
  console.log(
    `embed-service listening on :${port} ` +
      `(embedding=${config.embeddingModel}, rerank=${config.rerankModel}, dim=${config.dim})`
  );
});
