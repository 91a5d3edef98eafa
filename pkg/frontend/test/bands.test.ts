import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import {
    CSV_HEADER,
    bandsToCsv,
    computeBand,
    loadRuns,
    movingAverage,
    parseMetricsCsv,
} from "../src/bands.js";
import { renderFigure } from "../src/svg.js";
import { main } from "../src/cli.js";

function metricsCsv(algo: string, seed: number, rows: Array<[number, number]>): string {
    const lines = [CSV_HEADER];
    for (const [step, mean] of rows) {
        lines.push(`${step},demo,${algo},${seed},${mean},0.1,0.01`);
    }
    return lines.join("\n") + "\n";
}

function writeRunDir(): string {
    const dir = mkdtempSync(join(tmpdir(), "plotruns-"));
    const grid: Array<[string, number, Array<[number, number]>]> = [
        ["nac", 0, [[100, 1], [200, 2], [300, 3]]],
        ["nac", 1, [[100, 2], [200, 3], [300, 4]]],
        ["nac", 2, [[100, 3], [200, 4], [300, 8]]],
        ["dqfd", 0, [[100, 0], [200, 1], [300, 1]]],
        ["dqfd", 1, [[100, 1], [200, 1], [300, 2]]],
        ["dqfd", 2, [[100, 2], [200, 1], [300, 3]]],
    ];
    for (const [algo, seed, rows] of grid) {
        writeFileSync(join(dir, `${algo}-s${seed}.csv`), metricsCsv(algo, seed, rows));
    }
    return dir;
}

describe("parseMetricsCsv", () => {
    it("parses one series per (algo, seed)", () => {
        const text = metricsCsv("nac", 3, [[10, 1.5], [20, 2.5]]);
        const series = parseMetricsCsv(text, "x.csv");
        expect(series).toHaveLength(1);
        expect(series[0].algo).toBe("nac");
        expect(series[0].steps).toEqual([10, 20]);
        expect(series[0].meanReturn).toEqual([1.5, 2.5]);
    });

    it("rejects a wrong header", () => {
        expect(() => parseMetricsCsv("step,algo\n", "x.csv")).toThrow(/header/);
    });

    it("rejects shuffled steps", () => {
        const bad = [CSV_HEADER, "200,demo,nac,0,1,0,0", "100,demo,nac,0,2,0,0"].join("\n");
        expect(() => parseMetricsCsv(bad, "x.csv")).toThrow(/increasing/);
    });
});

describe("loadRuns", () => {
    it("groups two algos with three seeds each", () => {
        const dir = writeRunDir();
        const groups = loadRuns(dir);
        expect([...groups.keys()].sort()).toEqual(["dqfd", "nac"]);
        expect(groups.get("nac")).toHaveLength(3);
        expect(groups.get("dqfd")).toHaveLength(3);
    });

    it("returns an empty grouping for an empty directory", () => {
        const dir = mkdtempSync(join(tmpdir(), "plotruns-empty-"));
        expect(loadRuns(dir).size).toBe(0);
    });
});

describe("computeBand", () => {
    it("means equal the arithmetic seed means exactly", () => {
        const dir = writeRunDir();
        const band = computeBand("nac", loadRuns(dir).get("nac")!);
        expect(band.points.map(p => p.mean)).toEqual([2, 3, 5]);
        expect(band.seeds).toEqual([0, 1, 2]);
    });

    it("single seed yields a zero-width band", () => {
        const series = parseMetricsCsv(metricsCsv("bc", 0, [[1, 4], [2, 4]]), "x");
        const band = computeBand("bc", series);
        expect(band.points.every(p => p.std === 0)).toBe(true);
    });

    it("rejects misaligned step grids", () => {
        const a = parseMetricsCsv(metricsCsv("nac", 0, [[1, 1], [2, 2]]), "a");
        const b = parseMetricsCsv(metricsCsv("nac", 1, [[1, 1], [3, 2]]), "b");
        expect(() => computeBand("nac", [...a, ...b])).toThrow(/step grid/);
    });
});

describe("movingAverage", () => {
    it("window 1 is the identity", () => {
        const band = {
            algo: "x", seeds: [0],
            points: [{ step: 1, mean: 1, std: 0 }, { step: 2, mean: 3, std: 0 }],
        };
        expect(movingAverage(band, 1)).toEqual(band);
    });

    it("averages trailing windows", () => {
        const band = {
            algo: "x", seeds: [0],
            points: [1, 2, 3, 4].map(i => ({ step: i, mean: i, std: 0 })),
        };
        const sm = movingAverage(band, 2);
        expect(sm.points.map(p => p.mean)).toEqual([1, 1.5, 2.5, 3.5]);
    });
});

describe("renderFigure", () => {
    it("draws one legend entry and band per algo", () => {
        const dir = writeRunDir();
        const bands = [...loadRuns(dir).entries()].map(([a, rs]) => computeBand(a, rs));
        const svg = renderFigure(bands, { phaseLine: 200 });
        expect(svg).toContain("<svg");
        expect(svg).toContain("nac (3 seeds)");
        expect(svg).toContain("dqfd (3 seeds)");
        expect((svg.match(/<polygon/g) ?? []).length).toBe(2);
        expect(svg).toContain("stroke-dasharray");
    });

    it("constant series renders a horizontal mean line", () => {
        const series = parseMetricsCsv(metricsCsv("bc", 0, [[1, 5], [2, 5], [3, 5]]), "x");
        const svg = renderFigure([computeBand("bc", series)]);
        const line = svg.match(/<polyline points="([^"]+)"/)![1];
        const ys = line.split(" ").map(pt => pt.split(",")[1]);
        expect(new Set(ys).size).toBe(1);
    });
});

describe("cli smoke test", () => {
    it("emits a figure file and an exact sidecar band CSV", () => {
        const dir = writeRunDir();
        const out = join(dir, "fig.svg");
        const code = main([dir, "--out", out, "--phase-line", "200"]);
        expect(code).toBe(0);
        expect(existsSync(out)).toBe(true);
        const sidecar = readFileSync(join(dir, "fig.bands.csv"), "utf8");
        const lines = sidecar.trim().split("\n");
        expect(lines[0]).toBe("algo,step,mean,std");
        const nacMeans = lines.filter(l => l.startsWith("nac,")).map(l => Number(l.split(",")[2]));
        expect(nacMeans).toEqual([2, 3, 5]);
        const dqfdMeans = lines.filter(l => l.startsWith("dqfd,")).map(l => Number(l.split(",")[2]));
        expect(dqfdMeans).toEqual([1, 1, 2]);
    });
});

describe("bandsToCsv", () => {
    it("round-trips the computed points", () => {
        const band = {
            algo: "nac", seeds: [0, 1],
            points: [{ step: 10, mean: 1.25, std: 0.5 }],
        };
        expect(bandsToCsv([band])).toBe("algo,step,mean,std\nnac,10,1.25,0.5\n");
    });
});
