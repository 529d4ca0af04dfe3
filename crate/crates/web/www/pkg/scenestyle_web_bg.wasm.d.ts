/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_viewer_free: (a: number, b: number) => void;
export const histogram_distance_rgba: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const histogram_rgba: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const object_names: () => [number, number];
export const viewer_discover: (a: number, b: number, c: number) => [number, number, number];
export const viewer_eigenCount: (a: number) => [number, number, number];
export const viewer_eigenvalue: (a: number, b: number) => [number, number, number];
export const viewer_faceCount: (a: number) => number;
export const viewer_new: (a: number, b: number) => [number, number, number];
export const viewer_renderEigenfunction: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const viewer_renderMaterials: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const viewer_renderParts: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const viewer_vertexCount: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
