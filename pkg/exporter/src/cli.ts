#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { exportTrace } from "./exporter.js";
import { measureLatencyTable } from "./latency.js";

await yargs(hideBin(process.argv))
  .scriptName("cascade-export")
  .command(
    "export",
    "run a tier-1/tier-2 model pair over a dataset and write a trace file",
    (y) =>
      y
        .option("task", { choices: ["classification", "span"] as const, default: "classification" as const })
        .option("dataset", { type: "string", demandOption: true, describe: "JSONL dataset" })
        .option("tier1", { type: "string", demandOption: true, describe: "tier-1 model ref" })
        .option("tier2", { type: "string", demandOption: true, describe: "tier-2 model ref" })
        .option("out", { type: "string", demandOption: true, describe: "trace output path" })
        .option("batch-size", { type: "number", default: 1 })
        .option("measure-costs", { type: "boolean", default: false,
                describe: "record per-instance wall-clock costs (batch size 1)" })
        .option("dataset-name", { type: "string" }),
    async (argv) => {
      const summary = await exportTrace({
        task: argv.task,
        datasetPath: argv.dataset,
        tier1Ref: argv.tier1,
        tier2Ref: argv.tier2,
        outPath: argv.out,
        batchSize: argv["batch-size"],
        measureCosts: argv["measure-costs"],
        datasetName: argv["dataset-name"],
      });
      console.log(JSON.stringify(summary, null, 2));
    },
  )
  .command(
    "measure-latency",
    "measure a model's batch latency table and write it in the engine's format",
    (y) =>
      y
        .option("model", { type: "string", demandOption: true })
        .option("batch-sizes", { type: "string", default: "1,2,4,8" })
        .option("reps", { type: "number", default: 5 })
        .option("out", { type: "string", demandOption: true })
        .option("dataset", { type: "string", describe: "optional JSONL source of realistic inputs" }),
    async (argv) => {
      const table = await measureLatencyTable({
        modelRef: argv.model,
        batchSizes: argv["batch-sizes"].split(",").map((s) => Number(s.trim())),
        repetitions: argv.reps,
        outPath: argv.out,
        datasetPath: argv.dataset,
      });
      console.log(JSON.stringify({ out: argv.out, points: table.points.length }, null, 2));
    },
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    console.error(err?.message ?? msg);
    process.exit(1);
  })
  .parseAsync();
