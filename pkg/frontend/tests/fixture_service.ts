/** In-memory stand-in for the review service, used by the scripted client
 * tests.  It mirrors the server's contract: revision-guarded writes return
 * 409 when stale, and /metrics is recomputed from current state with the
 * same definitions the real calculators use. */

import type {
  AiFinding,
  GoldFinding,
  GoldRecord,
  MatchTriple,
  Metrics,
  SpeechView,
  SupergoldView,
} from "../src/types.js";

const fold = (s: string) => s.normalize("NFKD").replace(/\p{M}/gu, "").toLowerCase().trim();

interface SupergoldState extends Omit<SupergoldView, "revision"> {}

export interface FixtureData {
  speeches: SpeechView[];
  ai: Array<{ speech_id: string; actor: string; sentiment: number }>;
  gold: GoldRecord[];
  supergold: SupergoldState[];
}

export class FixtureService {
  speeches: SpeechView[];
  ai: Array<{ speech_id: string; actor: string; sentiment: number }>;
  gold: GoldRecord[];
  supergold: SupergoldState[];
  revisions = new Map<string, number>();
  matchsetRevision = 0;
  forbidden = new Set<string>(); // "aiId|goldId"
  droppedGold = new Set<string>();
  calls: string[] = [];
  offline = false;

  constructor(data: FixtureData) {
    this.speeches = data.speeches;
    this.ai = [...data.ai];
    this.gold = [...data.gold];
    this.supergold = data.supergold.map((r) => ({ ...r }));
  }

  /** Bound fetch replacement handed to the API client. */
  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    if (this.offline) {
      throw new TypeError("network unreachable");
    }
    const method = init?.method ?? "GET";
    const url = new URL(input, "http://fixture");
    const path = url.pathname;
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    this.calls.push(`${method} ${path}`);

    if (path === "/health") return json({ status: "ok", version: "fixture" });
    if (path === "/speeches/sample") return json(this.speeches);
    if (path === "/gold" && method === "GET") {
      const sid = url.searchParams.get("speech_id");
      return json(this.gold.filter((g) => !sid || g.speech_id === sid));
    }
    if (path === "/gold" && method === "POST") {
      if (!this.speeches.some((s) => s.speech_id === body.speech_id)) {
        return json({ detail: "unknown speech" }, 404);
      }
      const record: GoldRecord = {
        speech_id: body.speech_id,
        coder: (init?.headers as Record<string, string>)?.["X-Coder"] ?? "anonymous",
        actor_surface: body.actor,
        sentiment: body.sentiment,
      };
      this.gold.push(record);
      this.matchsetRevision += 1;
      return json({ record, task: null }, 201);
    }
    if (path === "/matches") {
      return json({
        revision: this.matchsetRevision,
        threshold: 0.85,
        triples: this.align(),
      });
    }
    const matchPatch = path.match(/^\/matches\/(.+)$/);
    if (matchPatch && method === "PATCH") {
      if (body.revision !== this.matchsetRevision) {
        return json({ detail: `stale revision ${body.revision}` }, 409);
      }
      const triple = this.align().find((t) => t.match_id === matchPatch[1]);
      if (!triple) return json({ detail: "unknown match" }, 404);
      if (body.op === "reject") {
        if (!triple.ai || !triple.gold) return json({ detail: "not a pair" }, 400);
        this.forbidden.add(`${triple.ai.ai_id}|${triple.gold.gold_id}`);
      } else if (body.op === "drop-gold") {
        const goldId = body.gold_id ?? triple.gold?.gold_id;
        if (!goldId) return json({ detail: "no gold" }, 400);
        this.droppedGold.add(goldId);
      } else {
        return json({ detail: "unknown op" }, 400);
      }
      this.matchsetRevision += 1;
      return json({ revision: this.matchsetRevision });
    }
    if (path === "/supergold" && method === "GET") {
      return json(
        this.supergold.map((r) => ({
          ...r,
          revision: this.revisions.get(r.supergold_id) ?? 0,
        })),
      );
    }
    const confirm = path.match(/^\/supergold\/(.+)\/confirm$/);
    if (confirm) {
      const record = this.supergold.find((r) => r.supergold_id === confirm[1]);
      if (!record) return json({ detail: "unknown supergold record" }, 404);
      const revision = this.revisions.get(record.supergold_id) ?? 0;
      if (method === "GET") {
        return json({
          supergold_id: record.supergold_id,
          confirmed: record.confirmed,
          provenance: record.provenance,
          revision,
        });
      }
      if (body.revision !== revision) {
        return json({ detail: `stale revision ${body.revision}, current is ${revision}` }, 409);
      }
      record.confirmed = body.confirmed;
      this.revisions.set(record.supergold_id, revision + 1);
      return json({
        supergold_id: record.supergold_id,
        confirmed: record.confirmed,
        revision: revision + 1,
      });
    }
    if (path === "/resolution-queue" && method === "GET") return json([]);
    if (path === "/metrics") {
      const metrics = this.metrics();
      return metrics ? json(metrics) : json({ detail: "no confirmed records" }, 400);
    }
    if (path === "/tasks") {
      return json(
        this.speeches.map((s, i) => ({
          task_id: `code:${s.speech_id}`,
          kind: "code-speech",
          payload: { speech_id: s.speech_id },
          status: "open",
          completed_by: "",
          created: i,
          revision: this.revisions.get(`code:${s.speech_id}`) ?? 0,
        })),
      );
    }
    return json({ detail: `no route for ${method} ${path}` }, 404);
  };

  /** Greedy per-speech alignment on folded equality, honoring overlays. */
  align(): MatchTriple[] {
    const triples: MatchTriple[] = [];
    let seq = 0;
    const aiItems: Array<AiFinding & { speech_id: string }> = this.ai.map((m, i) => ({
      ai_id: `ai${i}`,
      actor_surface: m.actor,
      sentiment: m.sentiment,
      speech_id: m.speech_id,
    }));
    const goldItems: Array<GoldFinding & { speech_id: string }> = this.gold
      .map((g, i) => ({
        gold_id: `g${i}`,
        actor_surface: g.actor_surface,
        sentiment: g.sentiment,
        coder: g.coder,
        speech_id: g.speech_id,
      }))
      .filter((g) => !this.droppedGold.has(g.gold_id));

    const speechIds = [...new Set([...aiItems, ...goldItems].map((x) => x.speech_id))].sort();
    for (const sid of speechIds) {
      const ais = aiItems.filter((a) => a.speech_id === sid);
      const golds = goldItems.filter((g) => g.speech_id === sid);
      const usedAi = new Set<string>();
      const usedGold = new Set<string>();
      for (const a of ais) {
        for (const g of golds) {
          if (usedAi.has(a.ai_id) || usedGold.has(g.gold_id)) continue;
          if (this.forbidden.has(`${a.ai_id}|${g.gold_id}`)) continue;
          if (fold(a.actor_surface) !== fold(g.actor_surface)) continue;
          usedAi.add(a.ai_id);
          usedGold.add(g.gold_id);
          triples.push({
            match_id: `m${seq++}`,
            speech_id: sid,
            ai: strip(a),
            gold: stripGold(g),
            supergold_id: null,
            score: 1.0,
            duplicate_gold: false,
          });
        }
      }
      for (const a of ais) {
        if (!usedAi.has(a.ai_id)) {
          triples.push({
            match_id: `m${seq++}`,
            speech_id: sid,
            ai: strip(a),
            gold: null,
            supergold_id: null,
            score: null,
            duplicate_gold: false,
          });
        }
      }
      for (const g of golds) {
        if (!usedGold.has(g.gold_id)) {
          triples.push({
            match_id: `m${seq++}`,
            speech_id: sid,
            ai: null,
            gold: stripGold(g),
            supergold_id: null,
            score: null,
            duplicate_gold: false,
          });
        }
      }
    }
    return triples;
  }

  metrics(): Metrics | null {
    const confirmed = this.supergold.filter((r) => r.confirmed);
    if (confirmed.length === 0) return null;
    const triples = this.align();
    const aiFindings = triples.filter((t) => t.ai !== null);
    const goldFindings = triples.filter((t) => t.gold !== null);

    const sgBySpeech = new Map<string, string[]>();
    for (const r of confirmed) {
      const list = sgBySpeech.get(r.speech_id) ?? [];
      list.push(fold(r.actor_surface));
      sgBySpeech.set(r.speech_id, list);
    }
    const nValid = aiFindings.filter((t) =>
      (sgBySpeech.get(t.speech_id) ?? []).includes(fold(t.ai!.actor_surface)),
    ).length;
    const aiBySpeech = new Map<string, string[]>();
    for (const t of aiFindings) {
      const list = aiBySpeech.get(t.speech_id) ?? [];
      list.push(fold(t.ai!.actor_surface));
      aiBySpeech.set(t.speech_id, list);
    }
    const matchedSg = confirmed.filter((r) =>
      (aiBySpeech.get(r.speech_id) ?? []).includes(fold(r.actor_surface)),
    ).length;

    const pairs = triples.filter((t) => t.ai !== null && t.gold !== null);
    const diffs = pairs.map((t) => t.ai!.sentiment - t.gold!.sentiment);
    const nAi = aiFindings.length;
    const nGold = goldFindings.length;
    return {
      sensitivity_vs_supergold: (100 * matchedSg) / confirmed.length,
      sensitivity_vs_human: nGold ? (100 * nValid) / nGold : null,
      fdr: nAi ? (100 * (nAi - nValid)) / nAi : null,
      mean_abs_diff: diffs.length
        ? diffs.reduce((a, d) => a + Math.abs(d), 0) / diffs.length
        : null,
      mean_signed_diff: diffs.length ? diffs.reduce((a, d) => a + d, 0) / diffs.length : null,
      n_supergold: confirmed.length,
      n_gold: nGold,
      n_ai: nAi,
      n_valid_ai: nValid,
      n_matched_pairs: pairs.length,
      entity_precision: null,
      entity_recall: null,
      entity_f1: null,
    };
  }
}

function strip(a: AiFinding & { speech_id: string }): AiFinding {
  const { speech_id: _sid, ...rest } = a;
  return rest;
}

function stripGold(g: GoldFinding & { speech_id: string }): GoldFinding {
  const { speech_id: _sid, ...rest } = g;
  return rest;
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function standardFixture(): FixtureService {
  return new FixtureService({
    speeches: [
      {
        speech_id: "s1",
        date: "2021-02-01",
        speaker_name: "A. Speaker",
        speaker_party: "BETA",
        text: "It is clear that Alpha has failed this country once again.",
      },
      {
        speech_id: "s2",
        date: "2021-02-08",
        speaker_name: "B. Speaker",
        speaker_party: "ALPHA",
        text: "I want to thank Beta for their constructive work on this bill.",
      },
      {
        speech_id: "s3",
        date: "2021-03-03",
        speaker_name: "C. Speaker",
        speaker_party: "GAMMA",
        text: "The proposal from Gamma is before the house today. Delta submitted an amendment.",
      },
    ],
    ai: [
      { speech_id: "s1", actor: "Alpha", sentiment: -3 },
      { speech_id: "s2", actor: "Beta", sentiment: 1 },
      { speech_id: "s3", actor: "Gamma", sentiment: 0 },
    ],
    gold: [
      { speech_id: "s2", coder: "fixture", actor_surface: "Beta", sentiment: 2 },
    ],
    supergold: [
      {
        supergold_id: "sg0",
        speech_id: "s2",
        actor_surface: "Beta",
        provenance: "both",
        confirmed: true,
        verifier: "",
        rationale: "",
      },
      {
        supergold_id: "sg1",
        speech_id: "s1",
        actor_surface: "Alpha",
        provenance: "ai-verified",
        confirmed: true,
        verifier: "affirmed",
        rationale: "",
      },
      {
        supergold_id: "sg2",
        speech_id: "s3",
        actor_surface: "Delta",
        provenance: "human-only",
        confirmed: false,
        verifier: "",
        rationale: "",
      },
    ],
  });
}
