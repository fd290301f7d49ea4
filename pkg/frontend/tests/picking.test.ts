import { describe, expect, test } from "vitest";

import {
  pickVertex,
  rayTriangle,
  tangentToward,
  transformPoints,
  vertexNormals,
  type Face,
  type Vec3,
} from "../src/picking.js";
import type { SceneFrame } from "../src/protocol.js";
import { framesOfType, loadFixture } from "./helpers.js";

const fixture = loadFixture();
const scene = framesOfType<SceneFrame>(fixture, "scene")[0]!;
const skinVerts = scene.skin.vertices as Vec3[];
const skinFaces = scene.skin.faces as Face[];

describe("rayTriangle", () => {
  const a: Vec3 = [0, 0, 0];
  const b: Vec3 = [1, 0, 0];
  const c: Vec3 = [0, 1, 0];

  test("hits the interior at the exact parameter", () => {
    expect(rayTriangle([0.2, 0.2, 3], [0, 0, -1], a, b, c)).toBe(3);
  });

  test("hits backfaces too", () => {
    expect(rayTriangle([0.2, 0.2, -3], [0, 0, 1], a, b, c)).toBe(3);
  });

  test("misses outside the triangle", () => {
    expect(rayTriangle([2, 2, 3], [0, 0, -1], a, b, c)).toBeNull();
  });

  test("misses when the triangle is behind the origin", () => {
    expect(rayTriangle([0.2, 0.2, 3], [0, 0, 1], a, b, c)).toBeNull();
  });

  test("misses a parallel ray", () => {
    expect(rayTriangle([0.2, 0.2, 3], [1, 0, 0], a, b, c)).toBeNull();
  });
});

describe("pickVertex on the recorded skin", () => {
  test("a ray down the palm normal snaps to the stored root", () => {
    const hit = pickVertex([0, 0, 1], [0, 0, -1], skinVerts, skinFaces);
    expect(hit).not.toBeNull();
    expect(hit!.vertex).toBe(4);
  });

  test("a ray over the neighbour snaps to it", () => {
    const hit = pickVertex([0, 0.306, 1], [0, 0, -1], skinVerts, skinFaces);
    expect(hit!.vertex).toBe(7);
  });

  test("the nearer of two surfaces wins", () => {
    const down = pickVertex([0, 0, 1], [0, 0, -1], skinVerts, skinFaces)!;
    const up = pickVertex([0, 0, -1], [0, 0, 1], skinVerts, skinFaces)!;
    expect(down.vertex).not.toBe(up.vertex);
  });

  test("a ray pointing away from the mesh is a miss", () => {
    expect(pickVertex([0, 0, 1], [0, 0, 1], skinVerts, skinFaces)).toBeNull();
  });

  test("a miss reports null rather than a zero hit", () => {
    expect(pickVertex([50, 50, 50], [0, 0, -1], skinVerts, skinFaces))
      .toBeNull();
  });
});

describe("vertexNormals", () => {
  test("flat palm vertices get an exact +z normal", () => {
    const normals = vertexNormals(skinVerts, skinFaces);
    expect(normals[4]).toEqual([0, 0, 1]);
  });

  test("degenerate faces leave a zero normal, not NaN", () => {
    const verts: Vec3[] = [[0, 0, 0], [1, 0, 0], [2, 0, 0]];
    const faces: Face[] = [[0, 1, 2]];
    expect(vertexNormals(verts, faces)).toEqual(
      [[0, 0, 0], [0, 0, 0], [0, 0, 0]]);
  });
});

describe("tangentToward", () => {
  test("matches the direction the service registered for the pick", () => {
    const pick = framesOfType(fixture, "pick")[0]!;
    const normals = vertexNormals(skinVerts, skinFaces);
    const preview = tangentToward(skinVerts, normals, 4, 7);
    expect(preview).toEqual(pick["direction"]);
    expect(preview).toEqual([0, 1, 0]);
  });

  test("rejects a toward vertex on the root normal line", () => {
    const verts: Vec3[] = [[0, 0, 0], [0, 0, 1]];
    const normals: Vec3[] = [[0, 0, 1], [0, 0, 1]];
    expect(tangentToward(verts, normals, 0, 1)).toBeNull();
  });

  test("projects an oblique offset into the tangent plane", () => {
    const verts: Vec3[] = [[0, 0, 0], [0, 3, 4]];
    const normals: Vec3[] = [[0, 0, 1], [0, 0, 1]];
    expect(tangentToward(verts, normals, 0, 1)).toEqual([0, 1, 0]);
  });
});

describe("transformPoints", () => {
  test("identity leaves points untouched", () => {
    const eye = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];
    expect(transformPoints(skinVerts.slice(0, 8), eye))
      .toEqual(skinVerts.slice(0, 8));
  });

  test("the recorded object pose shifts the origin to its column", () => {
    const pose = scene.object.pose;
    const [moved] = transformPoints([[0, 0, 0]], pose);
    expect(moved).toEqual([pose[0]![3]!, pose[1]![3]!, pose[2]![3]!]);
  });

  test("rotation rows apply before the translation", () => {
    const quarter = [
      [0, -1, 0, 1],
      [1, 0, 0, 2],
      [0, 0, 1, 3],
      [0, 0, 0, 1],
    ];
    expect(transformPoints([[1, 0, 0]], quarter)).toEqual([[1, 3, 3]]);
  });
});
