#!/usr/bin/env node
import { writeFileSync } from "fs";
import { bandsToCsv, computeBand, loadRuns, movingAverage } from "./bands.js";
import { renderFigure } from "./svg.js";

function usage(): never {
    console.error("usage: plot-runs <dir> --out <file.svg> [--phase-line <step>] [--smooth <window>]");
    process.exit(2);
}

export function main(argv: string[]): number {
    let dir: string | undefined;
    let out: string | undefined;
    let phaseLine: number | undefined;
    let smooth = 1;
    for (let i = 0; i < argv.length; i++) {
        const arg = argv[i];
        if (arg === "--out") out = argv[++i];
        else if (arg === "--phase-line") phaseLine = Number(argv[++i]);
        else if (arg === "--smooth") smooth = Number(argv[++i]);
        else if (!arg.startsWith("--") && dir === undefined) dir = arg;
        else usage();
    }
    if (!dir || !out) usage();
    if (phaseLine !== undefined && !Number.isFinite(phaseLine)) usage();
    if (!Number.isFinite(smooth) || smooth < 1) usage();

    const groups = loadRuns(dir);
    if (groups.size === 0) {
        console.error(`no metrics CSVs found under ${dir}`);
        return 1;
    }
    const bands = [...groups.entries()]
        .sort(([a], [b]) => a.localeCompare(b))
        .map(([algo, runs]) => movingAverage(computeBand(algo, runs), smooth));

    writeFileSync(out, renderFigure(bands, { phaseLine }));
    const sidecar = out.replace(/\.svg$/, "") + ".bands.csv";
    writeFileSync(sidecar, bandsToCsv(bands));
    for (const band of bands) {
        console.log(`${band.algo}: ${band.seeds.length} seeds, ${band.points.length} points`);
    }
    console.log(`wrote ${out} and ${sidecar}`);
    return 0;
}

const isMain = process.argv[1] !== undefined &&
    import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
    process.exit(main(process.argv.slice(2)));
}
