// Run-length encoding for binary masks, matching the service wire format:
// the mask is flattened row-major and stored as comma-separated run lengths,
// alternating zero-runs and one-runs, starting with the zero-run (which may
// be 0). Example: [[0,1],[1,1]] -> "1,3".

export function encodeRle(mask: Uint8Array, height: number, width: number): string {
  if (mask.length !== height * width) {
    throw new Error(`mask has ${mask.length} cells, expected ${height * width}`);
  }
  if (mask.length === 0) return "";
  const counts: number[] = [];
  let current = 0;
  let run = 0;
  for (const v of mask) {
    const bit = v !== 0 ? 1 : 0;
    if (bit === current) {
      run += 1;
    } else {
      counts.push(run);
      current = bit;
      run = 1;
    }
  }
  counts.push(run);
  return counts.join(",");
}

export function decodeRle(rle: string, height: number, width: number): Uint8Array {
  const total = height * width;
  const counts = rle === "" ? [] : rle.split(",").map((c) => {
    const n = Number(c);
    if (!Number.isInteger(n)) throw new Error(`malformed RLE string: ${rle}`);
    return n;
  });
  let sum = 0;
  for (const c of counts) {
    if (c < 0) throw new Error(`malformed RLE string: ${rle}`);
    sum += c;
  }
  if (sum !== total) {
    throw new Error(`RLE counts sum to ${sum}, expected ${total} for ${height}x${width}`);
  }
  const flat = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const count of counts) {
    if (value) flat.fill(1, pos, pos + count);
    pos += count;
    value ^= 1;
  }
  return flat;
}
