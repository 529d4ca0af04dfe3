/* tslint:disable */
/* eslint-disable */

/**
 * One synthetic object normalized to the unit box, with its lazily computed
 * spectral basis and the latest discovered parts.
 */
export class Viewer {
    free(): void;
    [Symbol.dispose](): void;
    discover(merge_threshold: number, seed: number): number;
    eigenCount(): number;
    eigenvalue(j: number): number;
    faceCount(): number;
    constructor(name: string);
    renderEigenfunction(j: number, size: number, azimuth: number, elevation: number): Uint8Array;
    renderMaterials(size: number, azimuth: number, elevation: number): Uint8Array;
    renderParts(size: number, azimuth: number, elevation: number): Uint8Array;
    vertexCount(): number;
}

export function histogram_distance_rgba(a: Uint8Array, aw: number, ah: number, b: Uint8Array, bw: number, bh: number): number;

export function histogram_rgba(rgba: Uint8Array, width: number, height: number): Uint8Array;

/**
 * Names of the synthetic objects the viewer can load.
 */
export function object_names(): string[];

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_viewer_free: (a: number, b: number) => void;
    readonly histogram_distance_rgba: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly histogram_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly object_names: () => [number, number];
    readonly viewer_discover: (a: number, b: number, c: number) => [number, number, number];
    readonly viewer_eigenCount: (a: number) => [number, number, number];
    readonly viewer_eigenvalue: (a: number, b: number) => [number, number, number];
    readonly viewer_faceCount: (a: number) => number;
    readonly viewer_new: (a: number, b: number) => [number, number, number];
    readonly viewer_renderEigenfunction: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly viewer_renderMaterials: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly viewer_renderParts: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly viewer_vertexCount: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
