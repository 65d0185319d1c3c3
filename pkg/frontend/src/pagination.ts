export const PAGE_SIZE = 10;

export function pageCount(total: number, pageSize: number = PAGE_SIZE): number {
  if (total <= 0) return 0;
  return Math.ceil(total / pageSize);
}

export function clampPage(page: number, total: number, pageSize: number = PAGE_SIZE): number {
  const pages = pageCount(total, pageSize);
  if (pages === 0) return 0;
  return Math.min(Math.max(page, 0), pages - 1);
}

export function windowStart(page: number, pageSize: number = PAGE_SIZE): number {
  return page * pageSize;
}

/** Byte offsets from the gateway point into the UTF-8 query; the caret in
 * the UI needs a character index. */
export function byteOffsetToCharIndex(text: string, byteOffset: number): number {
  const encoder = new TextEncoder();
  let bytes = 0;
  for (let index = 0; index < text.length; index += 1) {
    if (bytes >= byteOffset) return index;
    bytes += encoder.encode(text[index] ?? "").length;
  }
  return text.length;
}
