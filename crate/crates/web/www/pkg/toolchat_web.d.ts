/* tslint:disable */
/* eslint-disable */

/**
 * Maps a pixel box onto the 0..=1000 grid.
 *
 * Returns `{"grid": [x1, y1, x2, y2], "text": ...}` where `text` is the box as it
 * appears inside a prompt.
 */
export function bbox(x1: number, y1: number, x2: number, y2: number, width: number, height: number): string;

/**
 * Parses a raw assistant generation into pretty-printed JSON.
 */
export function parse(raw: string, functions_present: boolean): string;

/**
 * Renders a conversation given as JSON into the prompt string.
 */
export function render(conversation_json: string, generation_header: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bbox: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly parse: (a: number, b: number, c: number) => [number, number, number, number];
    readonly render: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
