/**
 * Client-side rule drafting: similarity slider, predicate builder state, and
 * the live-simulation loop (debounced, latest-wins).
 *
 * The slider exposes similarity in [0, 1]; the engine wants a Hamming
 * threshold tau in [0, B].  The mapping is monotone (higher similarity means
 * a tighter tau) and surjective onto the integer range.
 */

import { ApiClient, SimulationReport } from './api';

export interface PredicateClause {
  all_of: string[];
}

export interface RuleDraft {
  name: string;
  seedItemIds: string[];
  seedVectors: number[][];
  codeBits: number;
  slider: number; // similarity in [0, 1]
  clauses: PredicateClause[];
  combine: 'AND' | 'IMAGE_ONLY' | 'TEXT_ONLY';
  lastReport: SimulationReport | null;
  stale: boolean;
  finalized: boolean;
}

export function newDraft(name: string, codeBits: number): RuleDraft {
  return {
    name,
    seedItemIds: [],
    seedVectors: [],
    codeBits,
    slider: 0.9,
    clauses: [],
    combine: 'AND',
    lastReport: null,
    stale: false,
    finalized: false,
  };
}

export function sliderToTau(slider: number, codeBits: number): number {
  if (slider < 0 || slider > 1) {
    throw new RangeError(`slider ${slider} outside [0, 1]`);
  }
  return Math.round((1 - slider) * codeBits);
}

export function tauToSlider(tau: number, codeBits: number): number {
  if (tau < 0 || tau > codeBits) {
    throw new RangeError(`tau ${tau} outside [0, ${codeBits}]`);
  }
  return 1 - tau / codeBits;
}

export function draftPredicate(draft: RuleDraft): { any_of: PredicateClause[] } | null {
  const clauses = draft.clauses.filter((c) => c.all_of.length > 0);
  return clauses.length ? { any_of: clauses } : null;
}

export function draftBody(draft: RuleDraft): object {
  const seeds = [
    ...draft.seedItemIds.map((id) => ({ item_id: id })),
    ...draft.seedVectors.map((v) => ({ embedding: v })),
  ];
  return {
    name: draft.name,
    seeds,
    tau: sliderToTau(draft.slider, draft.codeBits),
    predicate: draftPredicate(draft),
    combine: draft.combine,
  };
}

function assertEditable(draft: RuleDraft): void {
  if (draft.finalized) {
    throw new Error('finalized rules are immutable; start a new draft');
  }
}

export function setSlider(draft: RuleDraft, value: number): RuleDraft {
  assertEditable(draft);
  if (value < 0 || value > 1) throw new RangeError(`slider ${value} outside [0, 1]`);
  return { ...draft, slider: value };
}

export function setClauses(draft: RuleDraft, clauses: PredicateClause[]): RuleDraft {
  assertEditable(draft);
  return { ...draft, clauses };
}

export function addSeed(draft: RuleDraft, itemId: string): RuleDraft {
  assertEditable(draft);
  return { ...draft, seedItemIds: [...draft.seedItemIds, itemId] };
}

/** Create the draft server-side and run one simulation against the sample. */
export async function simulateDraft(
  api: ApiClient,
  draft: RuleDraft,
  limit = 20,
): Promise<SimulationReport> {
  if (draft.seedItemIds.length + draft.seedVectors.length === 0) {
    throw new Error('draft needs at least one seed');
  }
  const rule = await api.createRule(draftBody(draft));
  return api.simulateRule(rule.rule_id, limit);
}

export interface SimulatorView {
  report: SimulationReport | null;
  stale: boolean;
  error: string | null;
}

/**
 * Debounced latest-wins simulation loop.
 *
 * Every edit schedules a simulate after `debounceMs` of quiet; responses for
 * superseded edits are discarded, so the rendered report always belongs to
 * the newest draft.  On failure the last good report stays visible with a
 * staleness flag.
 */
export class LiveSimulator {
  private seq = 0;
  private applied = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  view: SimulatorView = { report: null, stale: false, error: null };

  constructor(
    private run: (draft: RuleDraft) => Promise<SimulationReport>,
    private onChange: (view: SimulatorView) => void = () => {},
    private debounceMs = 250,
  ) {}

  edit(draft: RuleDraft): void {
    const ticket = ++this.seq;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire(ticket, draft);
    }, this.debounceMs);
  }

  private async fire(ticket: number, draft: RuleDraft): Promise<void> {
    try {
      const report = await this.run(draft);
      if (ticket <= this.applied) return; // superseded by a newer response
      this.applied = ticket;
      this.view = { report, stale: false, error: null };
    } catch (err) {
      if (ticket <= this.applied) return;
      this.applied = ticket;
      this.view = {
        report: this.view.report,
        stale: this.view.report !== null,
        error: err instanceof Error ? err.message : String(err),
      };
    }
    this.onChange(this.view);
  }
}
