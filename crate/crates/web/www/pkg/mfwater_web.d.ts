/* tslint:disable */
/* eslint-disable */

/**
 * A synthetic water scene with its alpha map and coarse spectrum precomputed.
 */
export class SceneDemo {
    free(): void;
    [Symbol.dispose](): void;
    alpha_image(): Uint8Array;
    alpha_range(): Float64Array;
    coarse_spectrum(): Float64Array;
    /**
     * Metrics of the last segmentation as JSON.
     */
    metrics_json(): string;
    constructor(side: number, seed: bigint);
    /**
     * The analysed core of the scene, log scaled.
     */
    scene_image(): Uint8Array;
    /**
     * Water where both alpha and f(alpha) fall inside the bounds. Colours:
     * blue hit, red false alarm, yellow miss.
     */
    segment(alpha_lo: number, alpha_hi: number, f_lo: number, f_hi: number, majority: number): Uint8Array;
    side(): number;
}

/**
 * Closed-form spectrum of the cascade.
 */
export function cascade_analytic_spectrum(w0: number, w1: number, w2: number, w3: number, depth: number): Float64Array;

/**
 * Estimated Legendre spectrum of the cascade.
 */
export function cascade_estimated_spectrum(w0: number, w1: number, w2: number, w3: number, depth: number, seed?: bigint | null): Float64Array;

/**
 * Grayscale RGBA rendering of a multiplicative cascade.
 */
export function cascade_image(w0: number, w1: number, w2: number, w3: number, depth: number, seed?: bigint | null): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scenedemo_free: (a: number, b: number) => void;
    readonly cascade_analytic_spectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly cascade_estimated_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly cascade_image: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly scenedemo_alpha_image: (a: number) => [number, number];
    readonly scenedemo_alpha_range: (a: number) => [number, number];
    readonly scenedemo_coarse_spectrum: (a: number) => [number, number];
    readonly scenedemo_metrics_json: (a: number) => [number, number];
    readonly scenedemo_new: (a: number, b: bigint) => [number, number, number];
    readonly scenedemo_scene_image: (a: number) => [number, number];
    readonly scenedemo_segment: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly scenedemo_side: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
