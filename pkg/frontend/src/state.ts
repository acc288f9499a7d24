// Console state machine. All license reasoning stays on the server; this
// module only moves API payloads between screens and keeps the UI honest
// about staleness, conflicts, and authorization.

import { ApiClient, ApiError } from "./api.js";
import type { FindingsDoc, QueueFilters, Release } from "./types.js";

export type Phase = "token-entry" | "queue";

export type DecisionOutcome =
  | "ok"
  | "conflict"
  | "forbidden"
  | "unauthenticated"
  | "invalid"
  | "network-error";

export interface ConsoleState {
  phase: Phase;
  items: Release[];
  total: number;
  page: number;
  pageSize: number;
  filters: QueueFilters;
  /** Last refresh failed; what is shown may be outdated. */
  stale: boolean;
  /** Retry banner text, when a refresh or submit hit the network. */
  error: string | null;
  /** Transient toast: decision recorded, conflict resolved, etc. */
  notice: string | null;
  selected: Release | null;
  selectedFindings: FindingsDoc | null;
  /** A 403 was seen: decision controls are disabled with a hint. */
  reviewerBlocked: boolean;
  submitting: boolean;
}

export function initialState(): ConsoleState {
  return {
    phase: "token-entry",
    items: [],
    total: 0,
    page: 1,
    pageSize: 50,
    filters: {},
    stale: false,
    error: null,
    notice: null,
    selected: null,
    selectedFindings: null,
    reviewerBlocked: false,
    submitting: false,
  };
}

/** A rejection needs a written rationale before submit is possible. */
export function canSubmit(verdict: "cleared" | "rejected", rationale: string): boolean {
  return verdict === "cleared" || rationale.trim().length > 0;
}

export class ConsoleController {
  state: ConsoleState = initialState();
  private api: ApiClient | null = null;
  private listeners: Array<(state: ConsoleState) => void> = [];

  onChange(listener: (state: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(partial: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  connect(api: ApiClient): Promise<void> {
    this.api = api;
    this.patch({ phase: "queue" });
    return this.refresh();
  }

  disconnect(): void {
    this.api = null;
    this.state = initialState();
    this.emit();
  }

  async refresh(): Promise<void> {
    if (!this.api) return;
    try {
      const page = await this.api.queue(
        this.state.filters,
        this.state.page,
        this.state.pageSize,
      );
      const selected = this.state.selected
        ? page.items.find((r) => r.release_id === this.state.selected!.release_id) ??
          this.state.selected
        : null;
      this.patch({
        items: page.items,
        total: page.total,
        stale: false,
        error: null,
        selected,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        // Token rejected: back to token entry.
        this.patch({ phase: "token-entry", error: "session expired or token invalid" });
        return;
      }
      // Network trouble: keep what we have, mark it visibly stale.
      this.patch({
        stale: true,
        error: err instanceof Error ? err.message : String(err),
      });
    }
  }

  async setFilters(filters: QueueFilters): Promise<void> {
    this.patch({ filters, page: 1 });
    await this.refresh();
  }

  async setPage(page: number): Promise<void> {
    this.patch({ page: Math.max(1, page) });
    await this.refresh();
  }

  async select(release: Release): Promise<void> {
    this.patch({ selected: release, selectedFindings: null, notice: null });
    if (!this.api) return;
    try {
      const findings = await this.api.findings(release.release_id);
      this.patch({ selectedFindings: findings });
    } catch {
      // Detail screen still renders from the queue payload's summary.
      this.patch({ selectedFindings: null });
    }
  }

  deselect(): void {
    this.patch({ selected: null, selectedFindings: null });
  }

  /**
   * Record a decision: optimistic removal from the queue, exactly one POST,
   * confirmed (or rolled back) by the server response.
   */
  async decide(
    verdict: "cleared" | "rejected",
    rationale: string,
  ): Promise<DecisionOutcome> {
    const subject = this.state.selected;
    if (!this.api || !subject || this.state.submitting) return "invalid";
    if (!canSubmit(verdict, rationale)) return "invalid";

    const backup = this.state.items;
    this.patch({
      submitting: true,
      items: this.state.items.filter((r) => r.release_id !== subject.release_id),
    });
    try {
      await this.api.decide(subject.release_id, verdict, rationale);
      this.patch({
        submitting: false,
        selected: null,
        selectedFindings: null,
        total: Math.max(0, this.state.total - 1),
        notice:
          verdict === "cleared"
            ? `${subject.canonical_name} ${subject.coords.version} cleared`
            : `${subject.canonical_name} ${subject.coords.version} rejected`,
      });
      return "ok";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Someone else decided first: discard the local action and show
        // server truth.
        this.patch({
          submitting: false,
          selected: null,
          selectedFindings: null,
          notice: `${subject.canonical_name}: already decided elsewhere; queue reloaded`,
        });
        await this.refresh();
        return "conflict";
      }
      if (err instanceof ApiError && err.status === 403) {
        this.patch({
          submitting: false,
          items: backup,
          reviewerBlocked: true,
          notice: "this token has no reviewer role; decisions are disabled",
        });
        return "forbidden";
      }
      if (err instanceof ApiError && err.status === 401) {
        this.patch({ submitting: false, phase: "token-entry" });
        return "unauthenticated";
      }
      // Network failure: nothing was lost, restore and offer retry.
      this.patch({
        submitting: false,
        items: backup,
        error: err instanceof Error ? err.message : String(err),
      });
      return "network-error";
    }
  }

  dismissNotice(): void {
    this.patch({ notice: null });
  }
}
