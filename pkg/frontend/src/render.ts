// HTML string rendering. Pure functions over ConsoleState so they can be
// unit-tested without a browser; main.ts owns the DOM and event wiring.
// Interactive elements carry data-action attributes for event delegation.

import type { ConsoleState } from "./state.js";
import { canSubmit } from "./state.js";
import type { FindingSummary, Release } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Human-readable age of a clearance request ("3d", "5h", "2m"). */
export function requestAge(requestedAt: string | null, now: Date): string {
  if (!requestedAt) return "–";
  const ms = now.getTime() - new Date(requestedAt).getTime();
  if (ms < 0) return "0m";
  const minutes = Math.floor(ms / 60_000);
  if (minutes < 60) return `${minutes}m`;
  const hours = Math.floor(minutes / 60);
  if (hours < 48) return `${hours}h`;
  return `${Math.floor(hours / 24)}d`;
}

/**
 * Side-by-side declared vs detected cell. The comparison is plain string
 * equality of the server-rendered expressions; the console never parses
 * or interprets them.
 */
export function licenseDiff(declared: string | null, detected: string | null): string {
  const left = declared ?? "(none declared)";
  const right = detected ?? "(nothing detected)";
  const cls = declared !== null && detected !== null && declared === detected
    ? "match"
    : "mismatch";
  return (
    `<span class="diff ${cls}">` +
    `<span class="declared" title="declared upstream">${escapeHtml(left)}</span>` +
    `<span class="arrow">→</span>` +
    `<span class="detected" title="detected by scanner">${escapeHtml(right)}</span>` +
    `</span>`
  );
}

export function renderTokenScreen(error: string | null): string {
  return `
<section class="token-entry">
  <h1>complygate review console</h1>
  <p>Paste an access token to open the clearance queue. The token stays in
  this browser session only.</p>
  ${error ? `<p class="error">${escapeHtml(error)}</p>` : ""}
  <form data-action="connect">
    <input type="password" name="token" placeholder="access token" autofocus />
    <button type="submit">Open queue</button>
  </form>
</section>`;
}

function topFinding(release: Release): string {
  const finding = release.findings_summary[0];
  if (!finding) return '<span class="muted">no findings</span>';
  return `${escapeHtml(finding.expression)} <span class="muted">(${finding.score.toFixed(2)}, ${escapeHtml(finding.path)})</span>`;
}

export function renderQueueScreen(state: ConsoleState, now: Date): string {
  const banners: string[] = [];
  if (state.stale) {
    banners.push(
      `<div class="banner stale">showing possibly outdated data — last refresh failed` +
        `${state.error ? `: ${escapeHtml(state.error)}` : ""}` +
        ` <button data-action="retry">retry</button></div>`,
    );
  } else if (state.error) {
    banners.push(
      `<div class="banner error">${escapeHtml(state.error)} <button data-action="retry">retry</button></div>`,
    );
  }
  if (state.notice) {
    banners.push(
      `<div class="banner notice">${escapeHtml(state.notice)} <button data-action="dismiss-notice">×</button></div>`,
    );
  }

  const rows = state.items
    .map(
      (release) => `
    <tr data-action="open" data-release-id="${escapeHtml(release.release_id)}">
      <td>${escapeHtml(release.coords.ecosystem)}/${escapeHtml(release.coords.name)}</td>
      <td>${escapeHtml(release.coords.version)}</td>
      <td>${licenseDiff(release.declared_license, release.detected_license)}</td>
      <td>${topFinding(release)}</td>
      <td>${requestAge(release.requested_at, now)}</td>
      <td><span class="state ${release.state}">${release.state}</span></td>
    </tr>`,
    )
    .join("");

  const empty = state.items.length === 0
    ? `<p class="empty-queue">The clearance queue is empty. 🎉</p>`
    : "";
  const pages = Math.max(1, Math.ceil(state.total / state.pageSize));

  return `
<section class="queue">
  ${banners.join("\n")}
  <header>
    <h1>Clearance queue <span class="muted">(${state.total} pending)</span></h1>
    <form data-action="filter">
      <input name="ecosystem" placeholder="ecosystem (npm, pypi, ...)"
             value="${escapeHtml(state.filters.ecosystem ?? "")}" />
      <input name="license" placeholder="license id (MIT, GPL-3.0-only, ...)"
             value="${escapeHtml(state.filters.license ?? "")}" />
      <button type="submit">Filter</button>
    </form>
  </header>
  ${empty}
  ${state.items.length > 0 ? `
  <table>
    <thead>
      <tr><th>component</th><th>version</th><th>declared → detected</th>
          <th>top finding</th><th>age</th><th>state</th></tr>
    </thead>
    <tbody>${rows}</tbody>
  </table>` : ""}
  <footer class="pager">
    <button data-action="prev-page" ${state.page <= 1 ? "disabled" : ""}>‹ newer</button>
    <span>page ${state.page} of ${pages}</span>
    <button data-action="next-page" ${state.page >= pages ? "disabled" : ""}>older ›</button>
  </footer>
</section>`;
}

function renderFindingRow(finding: FindingSummary & { copyright_lines?: string[] }): string {
  const copyrights = (finding.copyright_lines ?? [])
    .map((line) => `<div class="copyright">${escapeHtml(line)}</div>`)
    .join("");
  return `
    <li>
      <code>${escapeHtml(finding.path)}</code>
      <span class="method">${finding.method}</span>
      <strong>${escapeHtml(finding.expression)}</strong>
      <span class="score">score ${finding.score.toFixed(3)}</span>
      <span class="muted">lines ${finding.span[0]}–${finding.span[1]}</span>
      ${copyrights}
    </li>`;
}

export function renderDecisionScreen(
  state: ConsoleState,
  rationale: string,
  now: Date,
): string {
  const release = state.selected;
  if (!release) return renderQueueScreen(state, now);
  const findings = state.selectedFindings?.findings ?? release.findings_summary;
  const blockedHint = state.reviewerBlocked
    ? `<p class="hint">Decisions are disabled: this token has the developer
       role. Ask an OSPO reviewer to record the decision.</p>`
    : "";
  const disabled = state.reviewerBlocked || state.submitting;
  const rejectDisabled = disabled || !canSubmit("rejected", rationale);
  const notice = state.notice
    ? `<div class="banner notice">${escapeHtml(state.notice)} <button data-action="dismiss-notice">×</button></div>`
    : "";

  return `
<section class="decision">
  ${notice}
  <button data-action="back">← queue</button>
  <h1>${escapeHtml(release.canonical_name)} <span class="muted">${escapeHtml(release.coords.version)}</span></h1>
  <p class="coords">${escapeHtml(release.coords.ecosystem)}/${escapeHtml(release.coords.name)}@${escapeHtml(release.coords.version)}
     — requested ${requestAge(release.requested_at, now)} ago — state ${release.state}</p>
  <div class="license-compare">
    <div>
      <h2>Declared upstream</h2>
      <code>${escapeHtml(release.declared_license ?? "(none)")}</code>
    </div>
    <div>
      <h2>Detected by scanner</h2>
      <code>${escapeHtml(release.detected_license ?? "(none)")}</code>
    </div>
  </div>
  ${licenseDiff(release.declared_license, release.detected_license)}
  <h2>Findings</h2>
  <ul class="findings">${findings.map(renderFindingRow).join("") || "<li>none recorded</li>"}</ul>
  ${blockedHint}
  <form data-action="decide">
    <textarea name="rationale" placeholder="rationale (required to reject)"
              ${disabled ? "disabled" : ""}>${escapeHtml(rationale)}</textarea>
    <div class="buttons">
      <button data-action="approve" ${disabled ? "disabled" : ""}>Approve</button>
      <button data-action="reject" ${rejectDisabled ? "disabled" : ""}>Reject</button>
    </div>
  </form>
</section>`;
}

export function render(state: ConsoleState, rationale: string, now: Date): string {
  if (state.phase === "token-entry") return renderTokenScreen(state.error);
  if (state.selected) return renderDecisionScreen(state, rationale, now);
  return renderQueueScreen(state, now);
}
