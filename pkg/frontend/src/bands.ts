import { readFileSync, readdirSync } from "fs";
import { join } from "path";

export const CSV_HEADER =
    "step,phase,algo,seed,mean_return,std_return,val_bellman_error";

export interface RunSeries {
    algo: string;
    seed: number;
    steps: number[];
    meanReturn: number[];
    phases: string[];
}

export interface BandPoint {
    step: number;
    mean: number;
    std: number;
}

export interface AlgoBand {
    algo: string;
    seeds: number[];
    points: BandPoint[];
}

export function parseMetricsCsv(text: string, name: string): RunSeries[] {
    const lines = text.split(/\r?\n/).filter(l => l.length > 0);
    if (lines.length === 0 || lines[0] !== CSV_HEADER) {
        throw new Error(`${name}: unexpected metrics header ${JSON.stringify(lines[0] ?? "")}`);
    }
    const bySeed = new Map<string, RunSeries>();
    for (let i = 1; i < lines.length; i++) {
        const parts = lines[i].split(",");
        if (parts.length !== 7) {
            throw new Error(`${name}: line ${i + 1}: expected 7 fields, got ${parts.length}`);
        }
        const [stepRaw, phase, algo, seedRaw, meanRaw] = parts;
        const step = Number(stepRaw);
        const seed = Number(seedRaw);
        const mean = Number(meanRaw);
        if (!Number.isFinite(step) || !Number.isFinite(seed) || !Number.isFinite(mean)) {
            throw new Error(`${name}: line ${i + 1}: non-numeric step/seed/mean`);
        }
        const key = `${algo}#${seed}`;
        let series = bySeed.get(key);
        if (!series) {
            series = { algo, seed, steps: [], meanReturn: [], phases: [] };
            bySeed.set(key, series);
        }
        const prev = series.steps[series.steps.length - 1];
        if (prev !== undefined && step <= prev) {
            throw new Error(`${name}: line ${i + 1}: steps not strictly increasing`);
        }
        series.steps.push(step);
        series.meanReturn.push(mean);
        series.phases.push(phase);
    }
    return [...bySeed.values()];
}

export function loadRuns(dir: string): Map<string, RunSeries[]> {
    const groups = new Map<string, RunSeries[]>();
    const files = readdirSync(dir, { recursive: true }) as string[];
    for (const f of files.sort()) {
        if (!f.endsWith(".csv") || f.endsWith(".bands.csv")) continue;
        const path = join(dir, f);
        for (const series of parseMetricsCsv(readFileSync(path, "utf8"), path)) {
            const list = groups.get(series.algo) ?? [];
            list.push(series);
            groups.set(series.algo, list);
        }
    }
    return groups;
}

/** Arithmetic mean and population std across seeds, per aligned step. */
export function computeBand(algo: string, runs: RunSeries[]): AlgoBand {
    if (runs.length === 0) throw new Error(`no runs for ${algo}`);
    const steps = runs[0].steps;
    for (const r of runs) {
        if (r.steps.length !== steps.length || r.steps.some((s, i) => s !== steps[i])) {
            throw new Error(
                `${algo}: seed ${r.seed} has a different step grid; refusing to resample`);
        }
    }
    const points = steps.map((step, i) => {
        const xs = runs.map(r => r.meanReturn[i]);
        const mean = xs.reduce((a, b) => a + b, 0) / xs.length;
        const variance = xs.reduce((a, b) => a + (b - mean) * (b - mean), 0) / xs.length;
        return { step, mean, std: Math.sqrt(variance) };
    });
    return { algo, seeds: runs.map(r => r.seed).sort((a, b) => a - b), points };
}

export function movingAverage(band: AlgoBand, window: number): AlgoBand {
    if (window <= 1) return band;
    const smooth = (xs: number[]) =>
        xs.map((_, i) => {
            const lo = Math.max(0, i - window + 1);
            const slice = xs.slice(lo, i + 1);
            return slice.reduce((a, b) => a + b, 0) / slice.length;
        });
    const means = smooth(band.points.map(p => p.mean));
    const stds = smooth(band.points.map(p => p.std));
    return {
        ...band,
        points: band.points.map((p, i) => ({ step: p.step, mean: means[i], std: stds[i] })),
    };
}

export function bandsToCsv(bands: AlgoBand[]): string {
    const lines = ["algo,step,mean,std"];
    for (const band of bands) {
        for (const p of band.points) {
            lines.push(`${band.algo},${p.step},${p.mean},${p.std}`);
        }
    }
    return lines.join("\n") + "\n";
}
