/**
 * Ranked result grid with per-hit checkboxes and selection export.
 *
 * The grid is a pure view over the server page: cells keep the server's
 * order, and the selection can only ever reference displayed hits.
 */

import { PageHit, ResultPage } from './api';

export interface GridCell {
  itemId: string;
  title: string;
  productId: string;
  distanceBadge: string;
  thumbnailUrl: string | null;
  checked: boolean;
}

export interface ResultGridState {
  hits: PageHit[];
  selected: Set<string>;
  error: string | null;
}

export function emptyGrid(): ResultGridState {
  return { hits: [], selected: new Set(), error: null };
}

export function showPage(state: ResultGridState, page: ResultPage): ResultGridState {
  const displayed = new Set(page.hits.map((h) => h.item_id));
  const selected = new Set([...state.selected].filter((id) => displayed.has(id)));
  return { hits: page.hits, selected, error: null };
}

/** API failure: keep the current grid, surface a banner. */
export function showError(state: ResultGridState, message: string): ResultGridState {
  return { ...state, error: message };
}

export function toggle(state: ResultGridState, itemId: string): ResultGridState {
  if (!state.hits.some((h) => h.item_id === itemId)) {
    return state; // selection must stay within displayed hits
  }
  const selected = new Set(state.selected);
  if (selected.has(itemId)) {
    selected.delete(itemId);
  } else {
    selected.add(itemId);
  }
  return { ...state, selected };
}

function badge(hit: PageHit): string {
  return hit.cosine_score !== null
    ? `d=${hit.hamming_distance} cos=${hit.cosine_score.toFixed(3)}`
    : `d=${hit.hamming_distance}`;
}

/** Metadata image refs look like image:<url>; synthetic corpora have none. */
function thumbnail(hit: PageHit): string | null {
  const match = /\bimage:(\S+)/.exec(hit.title);
  return match ? match[1] : null;
}

export function renderGrid(state: ResultGridState): GridCell[] {
  return state.hits.map((h) => ({
    itemId: h.item_id,
    title: h.title,
    productId: h.product_id,
    distanceBadge: badge(h),
    thumbnailUrl: thumbnail(h),
    checked: state.selected.has(h.item_id),
  }));
}

export function isEmpty(state: ResultGridState): boolean {
  return state.hits.length === 0;
}

/** Export exactly the checked ids, in grid (server) order. */
export function exportSelection(state: ResultGridState): { selected_ids: string[] } {
  return {
    selected_ids: state.hits.map((h) => h.item_id).filter((id) => state.selected.has(id)),
  };
}
