/**
 * Corpus manifest for exported activations. Paths are stored relative to
 * the manifest's directory; frame_shift_ms and frame_offset_ms describe the
 * tapped layer's true frame geometry so downstream timing math needs no
 * knowledge of the model.
 */

export interface ManifestEntry {
  id: string;
  activations: string;
  wav?: string;
}

export interface Manifest {
  frame_shift_ms: number;
  frame_offset_ms: number;
  utterances: ManifestEntry[];
}

export function manifestJson(doc: Manifest): string {
  return JSON.stringify(doc, null, 2) + '\n';
}
