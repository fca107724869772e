/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scenedemo_free: (a: number, b: number) => void;
export const cascade_analytic_spectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const cascade_estimated_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
export const cascade_image: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
export const scenedemo_alpha_image: (a: number) => [number, number];
export const scenedemo_alpha_range: (a: number) => [number, number];
export const scenedemo_coarse_spectrum: (a: number) => [number, number];
export const scenedemo_metrics_json: (a: number) => [number, number];
export const scenedemo_new: (a: number, b: bigint) => [number, number, number];
export const scenedemo_scene_image: (a: number) => [number, number];
export const scenedemo_segment: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const scenedemo_side: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
