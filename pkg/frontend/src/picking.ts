/**
 * Vertex picking as pure geometry: a ray cast against mesh triangles,
 * snapped to the nearest triangle corner. The viewer builds rays from
 * pointer events; everything here is renderer-free so it can be tested
 * headless and reused for both object and skin meshes.
 */

export type Vec3 = [number, number, number];
export type Face = [number, number, number];

export interface PickHit {
  vertex: number;
  faceIndex: number;
  point: Vec3;
  distance: number;
}

const EPS = 1e-12;

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

/**
 * Moeller-Trumbore ray/triangle intersection. Returns the ray parameter
 * t >= 0 of the hit, or null for a miss or a parallel ray. Backfaces
 * count as hits so picking works from inside a cupped hand.
 */
export function rayTriangle(
  origin: Vec3, dir: Vec3, a: Vec3, b: Vec3, c: Vec3,
): number | null {
  const e1 = sub(b, a);
  const e2 = sub(c, a);
  const p = cross(dir, e2);
  const det = dot(e1, p);
  if (Math.abs(det) < EPS) return null;
  const inv = 1.0 / det;
  const s = sub(origin, a);
  const u = dot(s, p) * inv;
  if (u < -EPS || u > 1 + EPS) return null;
  const q = cross(s, e1);
  const v = dot(dir, q) * inv;
  if (v < -EPS || u + v > 1 + EPS) return null;
  const t = dot(e2, q) * inv;
  return t >= 0 ? t : null;
}

/**
 * Cast a ray at a triangle list and snap the nearest hit to the closest
 * corner of the struck face. Null when no triangle is hit, which the
 * caller treats as a no-op click.
 */
export function pickVertex(
  origin: Vec3, dir: Vec3, vertices: Vec3[], faces: Face[],
): PickHit | null {
  let bestT = Infinity;
  let bestFace = -1;
  for (let f = 0; f < faces.length; f++) {
    const face = faces[f]!;
    const t = rayTriangle(origin, dir,
      vertices[face[0]]!, vertices[face[1]]!, vertices[face[2]]!);
    if (t !== null && t < bestT) {
      bestT = t;
      bestFace = f;
    }
  }
  if (bestFace < 0) return null;

  const point: Vec3 = [
    origin[0] + bestT * dir[0],
    origin[1] + bestT * dir[1],
    origin[2] + bestT * dir[2],
  ];
  const face = faces[bestFace]!;
  let vertex = face[0];
  let bestD = Infinity;
  for (const id of face) {
    const d = norm(sub(point, vertices[id]!));
    if (d < bestD) {
      bestD = d;
      vertex = id;
    }
  }
  return { vertex, faceIndex: bestFace, point, distance: bestT };
}

/**
 * Preview of the tangent direction a (root, toward) pick will register:
 * the offset to the toward vertex projected off the root's normal, unit
 * length. Null when the projection vanishes (toward sits on the normal
 * line), matching the service's rejection of that pick.
 */
export function tangentToward(
  vertices: Vec3[], normals: Vec3[], root: number, toward: number,
): Vec3 | null {
  const n = normals[root]!;
  const d = sub(vertices[toward]!, vertices[root]!);
  const along = dot(d, n);
  const tangent: Vec3 = [
    d[0] - along * n[0],
    d[1] - along * n[1],
    d[2] - along * n[2],
  ];
  const len = norm(tangent);
  if (len < EPS) return null;
  return [tangent[0] / len, tangent[1] / len, tangent[2] / len];
}

/**
 * Area-weighted vertex normals: each face's raw edge cross product is
 * accumulated at its three corners, then normalized. This matches the
 * weighting the service uses, so tangent previews line up with the
 * direction the pick reply will carry.
 */
export function vertexNormals(vertices: Vec3[], faces: Face[]): Vec3[] {
  const acc: Vec3[] = vertices.map(() => [0, 0, 0]);
  for (const [a, b, c] of faces) {
    const n = cross(sub(vertices[b]!, vertices[a]!),
      sub(vertices[c]!, vertices[a]!));
    for (const id of [a, b, c]) {
      const slot = acc[id]!;
      slot[0] += n[0];
      slot[1] += n[1];
      slot[2] += n[2];
    }
  }
  return acc.map((n) => {
    const len = norm(n);
    return len > EPS ? [n[0] / len, n[1] / len, n[2] / len] : [0, 0, 0];
  });
}

/**
 * Apply a row-major 4x4 rigid transform to a vertex list. Used to put
 * object vertices into the posed coordinates the viewer renders, so a
 * pointer ray and the picked index agree with what is on screen.
 */
export function transformPoints(vertices: Vec3[], rows: number[][]): Vec3[] {
  const r0 = rows[0]!;
  const r1 = rows[1]!;
  const r2 = rows[2]!;
  return vertices.map(([x, y, z]) => [
    r0[0]! * x + r0[1]! * y + r0[2]! * z + r0[3]!,
    r1[0]! * x + r1[1]! * y + r1[2]! * z + r1[3]!,
    r2[0]! * x + r2[1]! * y + r2[2]! * z + r2[3]!,
  ]);
}
