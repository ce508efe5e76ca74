#!/usr/bin/env node
/**
 * convert --in DIR --name cora --out cora.graphtxt
 *
 * Reads the eight canonical files for one dataset and writes the engine's
 * text format, printing a conversion report. Exit codes: 0 ok, 1 usage,
 * 2 unreadable or inconsistent input.
 */

import * as fs from "fs";
import * as path from "path";

import { emitGraphtxt } from "./format";
import { ConvertError, convertDirectory } from "./planetoid";
import { PickleError } from "./pickle";

interface Args {
  inDir: string;
  name: string;
  out: string;
}

const USAGE =
  "usage: planetoid-convert [convert] --in DIR --name {cora|citeseer|pubmed} --out FILE";

function parseArgs(argv: string[]): Args {
  const args = [...argv];
  if (args[0] === "convert") args.shift();
  const values: Record<string, string> = {};
  for (let i = 0; i < args.length; i += 2) {
    const flag = args[i];
    const value = args[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new UsageError(`unexpected argument ${flag}`);
    }
    values[flag.slice(2)] = value;
  }
  for (const required of ["in", "name", "out"]) {
    if (!(required in values)) {
      throw new UsageError(`missing --${required}`);
    }
  }
  return { inDir: values["in"], name: values["name"], out: values["out"] };
}

class UsageError extends Error {}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 1;
  }
  try {
    const ds = convertDirectory(args.inDir, args.name);
    const { text, checksum } = emitGraphtxt(ds);
    fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
    fs.writeFileSync(args.out, text, "utf8");
    console.log(`${ds.name}: ${ds.numNodes} nodes, ${ds.edges.length} ` +
      `undirected edges (${ds.directedEntries} directed entries at source), ` +
      `${ds.numClasses} classes, feature_dim ${ds.featureDim}`);
    console.log(`splits: train=${ds.trainIds.length} val=${ds.valIds.length} ` +
      `test=${ds.testIds.length}`);
    if (ds.isolatedTestNodes > 0) {
      console.log(`note: ${ds.isolatedTestNodes} test-range nodes are ` +
        "isolated (zero features, no label)");
    }
    if (ds.sourceSelfLoops > 0) {
      console.log(`note: dropped ${ds.sourceSelfLoops} self-loop entries ` +
        "from the source adjacency");
    }
    console.log(`wrote ${args.out} (checksum ${checksum.slice(0, 12)}...)`);
    return 0;
  } catch (err) {
    if (err instanceof ConvertError || err instanceof PickleError) {
      console.error(`conversion error: ${err.message}`);
      return 2;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`conversion error: ${(err as Error).message}`);
      return 2;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
