import { AlgoBand } from "./bands.js";

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f"];

export interface FigureOptions {
    width?: number;
    height?: number;
    phaseLine?: number;
    title?: string;
}

interface Scale {
    (x: number): number;
}

function linScale(d0: number, d1: number, r0: number, r1: number): Scale {
    const span = d1 - d0 || 1;
    return x => r0 + ((x - d0) / span) * (r1 - r0);
}

function ticks(lo: number, hi: number, n: number): number[] {
    const span = hi - lo || 1;
    const step = Math.pow(10, Math.floor(Math.log10(span / n)));
    const err = span / n / step;
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
    const inc = step * mult;
    const start = Math.ceil(lo / inc) * inc;
    const out = [];
    for (let v = start; v <= hi + 1e-9; v += inc) out.push(Number(v.toPrecision(10)));
    return out;
}

function fmt(x: number): string {
    if (Math.abs(x) >= 10000 && Number.isInteger(x / 1000)) return `${x / 1000}k`;
    return `${Number(x.toPrecision(6))}`;
}

/** Solid mean line with a +-1 std shaded band per algorithm. */
export function renderFigure(bands: AlgoBand[], options: FigureOptions = {}): string {
    const width = options.width ?? 720;
    const height = options.height ?? 440;
    const margin = { left: 64, right: 16, top: 28, bottom: 44 };

    const allSteps = bands.flatMap(b => b.points.map(p => p.step));
    const lows = bands.flatMap(b => b.points.map(p => p.mean - p.std));
    const highs = bands.flatMap(b => b.points.map(p => p.mean + p.std));
    const x0 = Math.min(...allSteps);
    const x1 = Math.max(...allSteps);
    let y0 = Math.min(...lows);
    let y1 = Math.max(...highs);
    const pad = (y1 - y0 || 1) * 0.05;
    y0 -= pad;
    y1 += pad;

    const sx = linScale(x0, x1, margin.left, width - margin.right);
    const sy = linScale(y0, y1, height - margin.bottom, margin.top);

    const parts: string[] = [];
    parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`);
    parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

    for (const t of ticks(x0, x1, 6)) {
        const px = sx(t);
        parts.push(`<line x1="${px}" y1="${margin.top}" x2="${px}" y2="${height - margin.bottom}" stroke="#eee"/>`);
        parts.push(`<text x="${px}" y="${height - margin.bottom + 16}" text-anchor="middle">${fmt(t)}</text>`);
    }
    for (const t of ticks(y0, y1, 6)) {
        const py = sy(t);
        parts.push(`<line x1="${margin.left}" y1="${py}" x2="${width - margin.right}" y2="${py}" stroke="#eee"/>`);
        parts.push(`<text x="${margin.left - 6}" y="${py + 4}" text-anchor="end">${fmt(t)}</text>`);
    }
    parts.push(`<rect x="${margin.left}" y="${margin.top}" width="${width - margin.left - margin.right}" height="${height - margin.top - margin.bottom}" fill="none" stroke="#444"/>`);
    parts.push(`<text x="${(margin.left + width - margin.right) / 2}" y="${height - 8}" text-anchor="middle">training step</text>`);
    parts.push(`<text x="14" y="${(margin.top + height - margin.bottom) / 2}" text-anchor="middle" transform="rotate(-90 14 ${(margin.top + height - margin.bottom) / 2})">average total reward</text>`);
    if (options.title) {
        parts.push(`<text x="${(margin.left + width - margin.right) / 2}" y="${margin.top - 10}" text-anchor="middle" font-size="14">${options.title}</text>`);
    }

    bands.forEach((band, i) => {
        const color = PALETTE[i % PALETTE.length];
        const upper = band.points.map(p => `${sx(p.step)},${sy(p.mean + p.std)}`);
        const lower = [...band.points].reverse().map(p => `${sx(p.step)},${sy(p.mean - p.std)}`);
        parts.push(`<polygon points="${upper.join(" ")} ${lower.join(" ")}" fill="${color}" opacity="0.18"/>`);
        const line = band.points.map(p => `${sx(p.step)},${sy(p.mean)}`).join(" ");
        parts.push(`<polyline points="${line}" fill="none" stroke="${color}" stroke-width="2"/>`);
    });

    if (options.phaseLine !== undefined) {
        const px = sx(options.phaseLine);
        parts.push(`<line x1="${px}" y1="${margin.top}" x2="${px}" y2="${height - margin.bottom}" stroke="#333" stroke-dasharray="6 4"/>`);
    }

    bands.forEach((band, i) => {
        const color = PALETTE[i % PALETTE.length];
        const ly = margin.top + 16 + i * 18;
        const lx = margin.left + 10;
        parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
        parts.push(`<text x="${lx + 28}" y="${ly}">${band.algo} (${band.seeds.length} seeds)</text>`);
    });

    parts.push("</svg>");
    return parts.join("\n") + "\n";
}
