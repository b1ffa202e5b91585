/**
 * Node bindings for the procrew scoring toolchain.
 *
 * Exposes batch reward scoring, corpus metrics, and procedure validation to
 * JS/TS tooling by driving the `procrew` CLI in a subprocess (JSONL in,
 * canonical JSON out) — the same external interface the service uses, with no
 * HTTP hop. Every call is stateless: inputs are written to a fresh temp
 * directory, the CLI runs once, and its JSON output is returned verbatim.
 */

import { execFile } from "node:child_process";
import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

const execFileAsync = promisify(execFile);

export interface StepReward {
  format: number;
  type: number;
  necessary: number;
  optional: number;
  exceeding: number;
  distribution: number;
  total: number;
  tag: string;
}

export interface SampleReward {
  steps: StepReward[];
  sequence_reward: number;
}

export interface BatchRewardResult {
  results: SampleReward[];
  gt_distribution: Record<string, number>;
  pred_distribution: Record<string, number>;
}

export interface MetricReport {
  bleu2: number;
  bleu4: number;
  lev_avg: number;
  lev_thresholds: Record<string, number>;
  rouge1: number;
  rouge2: number;
  rougeL: number;
  meteor: number;
  seq_o: number;
  n_pairs: number;
  rouge_detail: Record<string, Record<string, number>>;
}

export interface Diagnostic {
  severity: "error" | "warning";
  code: string;
  message: string;
  ordinal: number;
}

export interface ValidationReport {
  ok: boolean;
  diagnostics: Diagnostic[];
}

export interface RewardOptions {
  /** distribution-modifier threshold (CLI --theta) */
  theta?: number;
  /** "main_text" (batch-adaptive) or "algorithm1" (negated mean) */
  exceedingMode?: "main_text" | "algorithm1";
  /** "mean_over_gt_length" or "sum" */
  sequenceAggregation?: "mean_over_gt_length" | "sum";
  /** schema config JSON path (CLI --schema) */
  schemaPath?: string;
}

export interface BindingOptions {
  /** command used to invoke the CLI; defaults to $PROCREW_BIN or "procrew" */
  command?: string[];
}

export class CliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number | null,
    public readonly stderr: string,
  ) {
    super(message);
    this.name = "CliError";
  }
}

function resolveCommand(options?: BindingOptions): string[] {
  if (options?.command && options.command.length > 0) return options.command;
  const env = process.env.PROCREW_BIN;
  if (env && env.length > 0) return env.split(" ");
  return ["procrew"];
}

async function runCli(
  args: string[],
  allowedExit: number[],
  options?: BindingOptions,
): Promise<void> {
  const [bin, ...pre] = resolveCommand(options);
  try {
    await execFileAsync(bin, [...pre, ...args], { maxBuffer: 256 * 1024 * 1024 });
  } catch (err) {
    const e = err as NodeJS.ErrnoException & { code?: number | string; stderr?: string };
    if (typeof e.code === "number" && allowedExit.includes(e.code)) return;
    throw new CliError(
      `procrew CLI failed: ${e.stderr ?? e.message}`,
      typeof e.code === "number" ? e.code : null,
      e.stderr ?? "",
    );
  }
}

async function withTempDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "procrew-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

function toJsonl(rows: object[]): string {
  return rows.map((r) => JSON.stringify(r)).join("\n") + "\n";
}

/**
 * Score raw model outputs against reference procedure texts.
 *
 * `preds` entries are full generations (reasoning block + answer); a bare
 * procedure text can be passed by wrapping it as `"<think></think>" + text`.
 */
export async function batchReward(
  refs: string[],
  preds: string[],
  rewardOptions?: RewardOptions,
  options?: BindingOptions,
): Promise<BatchRewardResult> {
  if (refs.length !== preds.length) {
    throw new Error(`length mismatch: ${refs.length} references vs ${preds.length} predictions`);
  }
  if (refs.length === 0) {
    throw new Error("batch must be non-empty");
  }
  return withTempDir(async (dir) => {
    const refsPath = join(dir, "refs.jsonl");
    const predsPath = join(dir, "preds.jsonl");
    const outPath = join(dir, "rewards.json");
    await writeFile(refsPath, toJsonl(refs.map((text, i) => ({ id: String(i), procedure_text: text }))));
    await writeFile(predsPath, toJsonl(preds.map((text, i) => ({ id: String(i), prediction_raw: text }))));
    const args = ["reward", "--refs", refsPath, "--preds", predsPath, "--out", outPath];
    if (rewardOptions?.schemaPath !== undefined) args.unshift("--schema", rewardOptions.schemaPath);
    if (rewardOptions?.theta !== undefined) args.push("--theta", String(rewardOptions.theta));
    if (rewardOptions?.exceedingMode !== undefined) args.push("--exceeding-mode", rewardOptions.exceedingMode);
    if (rewardOptions?.sequenceAggregation !== undefined) args.push("--seq-agg", rewardOptions.sequenceAggregation);
    await runCli(args, [0], options);
    return JSON.parse(await readFile(outPath, "utf-8")) as BatchRewardResult;
  });
}

/** Corpus metrics over (reference, prediction) text pairs. */
export async function evaluateCorpus(
  pairs: Array<{ reference: string; prediction: string }>,
  options?: BindingOptions,
): Promise<MetricReport> {
  if (pairs.length === 0) {
    throw new Error("corpus must be non-empty");
  }
  return withTempDir(async (dir) => {
    const refsPath = join(dir, "refs.jsonl");
    const predsPath = join(dir, "preds.jsonl");
    const outPath = join(dir, "metrics.json");
    await writeFile(refsPath, toJsonl(pairs.map((p, i) => ({ id: String(i), procedure_text: p.reference }))));
    await writeFile(predsPath, toJsonl(pairs.map((p, i) => ({ id: String(i), prediction: p.prediction }))));
    await runCli(["metrics", "--refs", refsPath, "--preds", predsPath, "--out", outPath], [0], options);
    return JSON.parse(await readFile(outPath, "utf-8")) as MetricReport;
  });
}

/** Parse and validate one procedure text; parse failures come back as error diagnostics. */
export async function validate(
  procedureText: string,
  options?: BindingOptions,
): Promise<ValidationReport> {
  return withTempDir(async (dir) => {
    const procPath = join(dir, "input.proc");
    const outPath = join(dir, "report.json");
    await writeFile(procPath, procedureText);
    // exit 1 just means the procedure has errors; the report still lands
    await runCli(["validate", procPath, "--out", outPath], [0, 1], options);
    return JSON.parse(await readFile(outPath, "utf-8")) as ValidationReport;
  });
}
