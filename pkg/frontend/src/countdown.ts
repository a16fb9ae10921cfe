/**
 * Silence countdown: tracks the session clock and how long until the
 * robot's next re-engagement prompt.
 *
 * Watch deadlines arrive in session seconds (time since the hello), so
 * the client anchors its own clock at the welcome message and measures
 * everything relative to that.
 */

export class SilenceCountdown {
  private anchor: number | null = null;
  private deadlineS: number | null = null;
  private stageValue = 1;

  constructor(private readonly now: () => number = () => Date.now() / 1000) {}

  /** Anchor the session clock; call when the welcome arrives. */
  startSession(): void {
    this.anchor = this.now();
  }

  arm(deadlineS: number, stage: number): void {
    this.deadlineS = deadlineS;
    this.stageValue = stage;
  }

  disarm(): void {
    this.deadlineS = null;
  }

  /** Seconds since the session started, 0 before the anchor is set. */
  sessionTime(): number {
    return this.anchor === null ? 0 : Math.max(0, this.now() - this.anchor);
  }

  /** Seconds until the next prompt, clamped at 0; null while unarmed. */
  remaining(): number | null {
    if (this.anchor === null || this.deadlineS === null) return null;
    return Math.max(0, this.deadlineS - this.sessionTime());
  }

  stage(): number {
    return this.stageValue;
  }
}

/** Drive a repaint callback on an interval; returns the stop function. */
export function startTicker(callback: () => void, periodMs = 100): () => void {
  const id = setInterval(callback, periodMs);
  return () => clearInterval(id);
}
