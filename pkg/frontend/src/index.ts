/**
 * Thin client for the cdawgkit CLI.
 *
 * Every function here shells out to a cdawgkit subcommand and passes the
 * JSONL/JSON wire formats through untouched, so results are identical to
 * what the CLI prints for the same inputs. Whole documents are marshaled
 * per call; no index structure or matching logic lives on this side.
 */
import { CliError, CliOptions, runCli } from "./bridge.js";

export { CliError, CliOptions, runCli } from "./bridge.js";

/** Must equal cdawgkit.__version__ of the core package. */
export const VERSION = "0.1.0";

/** One entry of the index manifest, as `cdawgkit stats` reports it. */
export interface ShardStats {
  file: string;
  doc_start: number;
  doc_end: number;
  n_tokens: number;
  n_states: number;
  n_edges: number;
  checksum: number;
  bytes: number;
  token_width: number;
}

export interface IndexStats {
  shard_count: number;
  total_tokens: number;
  separator: number;
  vocab_size: number;
  n_states: number;
  n_edges: number;
  bytes: number;
  states_per_token: number;
  edges_per_token: number;
  shards: ShardStats[];
}

export type Backend = "ram" | "disk";

/**
 * Handle to an index directory on disk. Safe to share between concurrent
 * queries; every call runs in its own process.
 */
export interface BoundIndex {
  readonly dir: string;
  readonly backend: Backend;
  readonly stats: IndexStats;
  readonly options: CliOptions;
}

export interface LoadIndexOptions extends CliOptions {
  backend?: Backend;
}

/**
 * Validate an index directory and return a handle to it. Fails if the
 * manifest or any shard file is missing or unreadable.
 */
export async function loadIndex(
  dir: string,
  options: LoadIndexOptions = {},
): Promise<BoundIndex> {
  const { backend = "ram", ...cli } = options;
  const out = await runCli(["stats", "--index", dir], undefined, cli);
  const stats = JSON.parse(out) as IndexStats;
  return { dir, backend, stats, options: cli };
}

/** The annotation record as the CLI emits it, one per document. */
export interface NnslAnnotation {
  id: string;
  /** per position, length of the longest corpus-attested suffix */
  nnsl: number[];
  /** per position, occurrence count of that longest match */
  counts: number[];
}

function docsToJsonl(docs: number[][], ids?: string[]): string {
  return docs
    .map((tokens, i) => JSON.stringify({ id: ids ? ids[i] : String(i), tokens }))
    .join("\n");
}

/**
 * Annotate a batch of documents in one CLI run. Output order matches
 * input order; ids default to "0", "1", ...
 */
export async function nnslQueryMany(
  index: BoundIndex,
  docs: number[][],
  ids?: string[],
): Promise<NnslAnnotation[]> {
  if (docs.length === 0) {
    return [];
  }
  const out = await runCli(
    ["query", "--index", index.dir, "--backend", index.backend, "--docs", "-"],
    docsToJsonl(docs, ids) + "\n",
    index.options,
  );
  return out
    .split("\n")
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line) as NnslAnnotation);
}

/**
 * Per-position longest-match lengths and occurrence counts for one
 * document, as parallel integer arrays. An empty document yields two
 * empty arrays.
 */
export async function nnslQuery(
  index: BoundIndex,
  tokens: number[],
): Promise<{ nnsl: number[]; counts: number[] }> {
  const [ann] = await nnslQueryMany(index, [tokens]);
  return { nnsl: ann.nnsl, counts: ann.counts };
}

export interface NoveltyPoint {
  n: number;
  novel: number;
  total: number;
  ratio: number;
}

/**
 * Pooled n-gram novelty curve over a batch of documents: for each n, how
 * many n-grams do not occur in the corpus, out of how many.
 */
export async function noveltyCurve(
  index: BoundIndex,
  docs: number[][],
  maxN?: number,
): Promise<NoveltyPoint[]> {
  const annotations = await runCli(
    ["query", "--index", index.dir, "--backend", index.backend, "--docs", "-"],
    docsToJsonl(docs) + "\n",
    index.options,
  );
  const args = ["novelty", "--annotations", "-", "--json"];
  if (maxN !== undefined) {
    args.push("--max-n", String(maxN));
  }
  const out = await runCli(args, annotations, index.options);
  return (JSON.parse(out) as { curve: NoveltyPoint[] }).curve;
}

export interface NnslStats {
  mean: number;
  max: number;
  median: number;
  per_doc: { id: string; mean: number; max: number; median: number }[];
}

/** Match-length summary statistics (mean/max/median, pooled and per doc). */
export async function nnslStats(
  index: BoundIndex,
  docs: number[][],
): Promise<NnslStats> {
  const annotations = await runCli(
    ["query", "--index", index.dir, "--backend", index.backend, "--docs", "-"],
    docsToJsonl(docs) + "\n",
    index.options,
  );
  const out = await runCli(
    ["novelty", "--annotations", "-", "--nnsl-stats"],
    annotations,
    index.options,
  );
  return JSON.parse(out) as NnslStats;
}

export interface LowerBoundParams {
  /** corpus size |C| in tokens */
  corpusSize: number;
  /** per-token probability bound p */
  p: number;
  /** entropy per token in bits */
  entropyBits: number;
}

/**
 * Closed-form lower bound on expected n-gram novelty of random text,
 * for n = 1..nMax. Needs no index.
 */
export async function lowerBoundCurve(
  params: LowerBoundParams,
  nMax = 100,
  options: CliOptions = {},
): Promise<{ n: number; bound: number }[]> {
  const out = await runCli(
    [
      "bound",
      "--corpus-size",
      String(params.corpusSize),
      "--p",
      String(params.p),
      "--entropy-bits",
      String(params.entropyBits),
      "--n-max",
      String(nMax),
      "--json",
    ],
    undefined,
    options,
  );
  return JSON.parse(out) as { n: number; bound: number }[];
}
