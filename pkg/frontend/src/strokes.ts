/** Stroke capture with an undo/redo stack that round-trips exactly. */

export type Point = readonly [number, number];

export interface Stroke {
  readonly points: Point[];
  readonly width: number;
}

export class StrokeSession {
  readonly canvasSize: number;
  private strokes: Stroke[] = [];
  private redoStack: Stroke[] = [];

  constructor(canvasSize: number) {
    if (!Number.isInteger(canvasSize) || canvasSize < 1) {
      throw new Error(`canvasSize must be a positive integer, got ${canvasSize}`);
    }
    this.canvasSize = canvasSize;
  }

  /** Committed strokes, oldest first. The array and strokes are frozen copies. */
  list(): readonly Stroke[] {
    return this.strokes.map((s) => ({ points: [...s.points], width: s.width }));
  }

  get length(): number {
    return this.strokes.length;
  }

  add(points: Point[], width = 2): void {
    if (points.length === 0) throw new Error("a stroke needs at least one point");
    if (width <= 0) throw new Error("stroke width must be positive");
    this.strokes.push({ points: points.map((p) => [p[0], p[1]] as const), width });
    this.redoStack = []; // a new stroke invalidates the redo branch
  }

  canUndo(): boolean {
    return this.strokes.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const s = this.strokes.pop();
    if (!s) return false;
    this.redoStack.push(s);
    return true;
  }

  redo(): boolean {
    const s = this.redoStack.pop();
    if (!s) return false;
    this.strokes.push(s);
    return true;
  }

  clear(): void {
    this.strokes = [];
    this.redoStack = [];
  }
}
