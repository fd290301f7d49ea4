/**
 * three.js rendering of a scene snapshot.
 *
 * The viewer draws what the service sent and nothing more: the object
 * mesh under its stored pose, the skin as a translucent shell, and one
 * mesh per hand link under either its rest transform or the last pose
 * echo. Vertex snapping happens in picking.ts on the raw payload
 * arrays; the viewer only supplies the pointer ray and the markers.
 */

import * as THREE from "three";

import type { MeshPayload, SceneFrame } from "./protocol.js";
import type { Vec3 } from "./picking.js";

function toMatrix4(rows: number[][]): THREE.Matrix4 {
  const flat = rows.flat();
  if (flat.length !== 16) throw new Error("expected a 4x4 matrix");
  // payload rows are row-major; fromArray reads column-major
  return new THREE.Matrix4().fromArray(flat).transpose();
}

function toGeometry(payload: MeshPayload): THREE.BufferGeometry {
  const geometry = new THREE.BufferGeometry();
  const positions = new Float32Array(payload.vertices.flat());
  geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
  geometry.setIndex(new THREE.BufferAttribute(
    new Uint32Array(payload.faces.flat()), 1));
  geometry.computeVertexNormals();
  return geometry;
}

export interface PointerRay {
  origin: Vec3;
  direction: Vec3;
}

export class SceneViewer {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly raycaster = new THREE.Raycaster();
  private readonly markers = new THREE.Group();
  private linkMeshes: THREE.Mesh[] = [];
  private objectMesh: THREE.Mesh | null = null;
  private skinMesh: THREE.Mesh | null = null;
  private yaw = 0.8;
  private pitch = 0.5;
  private radius = 1.2;
  private target = new THREE.Vector3();

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(
      45, canvas.clientWidth / Math.max(canvas.clientHeight, 1), 0.001, 100);
    this.scene.background = new THREE.Color(0x10151c);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(2, 3, 4);
    this.scene.add(key);
    this.scene.add(this.markers);
  }

  loadScene(frame: SceneFrame): void {
    for (const mesh of [this.objectMesh, this.skinMesh, ...this.linkMeshes]) {
      if (mesh) this.scene.remove(mesh);
    }
    this.linkMeshes = [];
    this.markers.clear();

    this.objectMesh = new THREE.Mesh(
      toGeometry(frame.object),
      new THREE.MeshStandardMaterial({
        color: 0x8a96a8, roughness: 0.8, side: THREE.DoubleSide,
      }));
    this.objectMesh.matrixAutoUpdate = false;
    this.objectMesh.matrix.copy(toMatrix4(frame.object.pose));
    this.scene.add(this.objectMesh);

    this.skinMesh = new THREE.Mesh(
      toGeometry(frame.skin),
      new THREE.MeshStandardMaterial({
        color: 0x3fae8c, transparent: true, opacity: 0.35,
        side: THREE.DoubleSide, depthWrite: false,
      }));
    this.scene.add(this.skinMesh);

    for (const link of frame.hand.links) {
      const mesh = new THREE.Mesh(
        toGeometry(link),
        new THREE.MeshStandardMaterial({ color: 0xc9a24b, roughness: 0.6 }));
      mesh.matrixAutoUpdate = false;
      mesh.matrix.copy(toMatrix4(link.rest_transform));
      this.scene.add(mesh);
      this.linkMeshes.push(mesh);
    }

    this.frameScene(frame);
  }

  private frameScene(frame: SceneFrame): void {
    const box = new THREE.Box3();
    for (const row of frame.object.vertices) {
      box.expandByPoint(new THREE.Vector3(...row));
    }
    for (const row of frame.skin.vertices) {
      box.expandByPoint(new THREE.Vector3(...row));
    }
    box.getCenter(this.target);
    this.radius = Math.max(box.getSize(new THREE.Vector3()).length(), 0.1) * 1.4;
  }

  /** Replace every link transform with a forward-kinematics echo. */
  applyPose(links: number[][][]): void {
    for (let i = 0; i < links.length && i < this.linkMeshes.length; i += 1) {
      const rows = links[i];
      const mesh = this.linkMeshes[i];
      if (rows && mesh) mesh.matrix.copy(toMatrix4(rows));
    }
  }

  setMarker(name: string, point: Vec3, color: number): void {
    const existing = this.markers.getObjectByName(name);
    if (existing) this.markers.remove(existing);
    const marker = new THREE.Mesh(
      new THREE.SphereGeometry(this.radius * 0.012, 12, 12),
      new THREE.MeshBasicMaterial({ color }));
    marker.name = name;
    marker.position.set(...point);
    this.markers.add(marker);
  }

  setArrow(name: string, from: Vec3, direction: Vec3, color: number): void {
    const existing = this.markers.getObjectByName(name);
    if (existing) this.markers.remove(existing);
    const arrow = new THREE.ArrowHelper(
      new THREE.Vector3(...direction).normalize(),
      new THREE.Vector3(...from),
      this.radius * 0.12, color);
    arrow.name = name;
    this.markers.add(arrow);
  }

  clearMarkers(): void {
    this.markers.clear();
  }

  orbitBy(dx: number, dy: number): void {
    this.yaw -= dx * 0.01;
    this.pitch = Math.min(1.5, Math.max(-1.5, this.pitch + dy * 0.01));
  }

  dolly(factor: number): void {
    this.radius = Math.min(50, Math.max(0.05, this.radius * factor));
  }

  /** World-space ray under the pointer, in payload coordinates. */
  rayFromPointer(clientX: number, clientY: number): PointerRay {
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((clientX - rect.left) / rect.width) * 2 - 1,
      -((clientY - rect.top) / rect.height) * 2 + 1);
    this.raycaster.setFromCamera(ndc, this.camera);
    const { origin, direction } = this.raycaster.ray;
    return {
      origin: [origin.x, origin.y, origin.z],
      direction: [direction.x, direction.y, direction.z],
    };
  }

  render(): void {
    const width = this.canvas.clientWidth;
    const height = Math.max(this.canvas.clientHeight, 1);
    if (this.canvas.width !== width || this.canvas.height !== height) {
      this.renderer.setSize(width, height, false);
      this.camera.aspect = width / height;
      this.camera.updateProjectionMatrix();
    }
    const cp = Math.cos(this.pitch);
    this.camera.position.set(
      this.target.x + this.radius * cp * Math.cos(this.yaw),
      this.target.y + this.radius * Math.sin(this.pitch),
      this.target.z + this.radius * cp * Math.sin(this.yaw));
    this.camera.lookAt(this.target);
    this.renderer.render(this.scene, this.camera);
  }
}
