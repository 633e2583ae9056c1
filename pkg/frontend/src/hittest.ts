// Pointer-to-region resolution over a composition's annotation list.
//
// Mirrors the daemon's rule exactly: among the regions containing the
// point, the smallest-area one wins; ties break by (part, feature)
// ascending. The arithmetic deliberately runs in normalized floats
// (micro / 1e6) so IEEE results are bit-identical to the backend's.

import type { AnnotationDoc } from "./api.js";

export const MICRO = 1_000_000;

export function hitTest(
  annotations: AnnotationDoc[],
  xMicro: number,
  yMicro: number,
): AnnotationDoc | null {
  const px = xMicro / MICRO;
  const py = yMicro / MICRO;
  let best: AnnotationDoc | null = null;
  let bestArea = Infinity;
  for (const a of annotations) {
    const rx = a.rect.x / MICRO;
    const ry = a.rect.y / MICRO;
    const rw = a.rect.w / MICRO;
    const rh = a.rect.h / MICRO;
    if (!(rx <= px && px <= rx + rw && ry <= py && py <= ry + rh)) continue;
    const area = rw * rh;
    if (
      best === null ||
      area < bestArea ||
      (area === bestArea &&
        (a.part < best.part ||
          (a.part === best.part && a.feature < best.feature)))
    ) {
      best = a;
      bestArea = area;
    }
  }
  return best;
}
