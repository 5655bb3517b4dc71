/** Typed client for the annotation HTTP API. */

export interface PlaceView {
  id: string;
  name: string;
  street: string | null;
  lat: number;
  lon: number;
}

export interface FeatureView {
  geo_distance_m: number;
  name_lev: number;
  name_jaro: number;
  street_lev: number;
  street_missing: boolean;
}

export interface PairView {
  pair_id: string;
  restaurant: PlaceView;
  poi: PlaceView;
  features: FeatureView;
  geohash6: string;
  predicted_label?: number;
  score?: number;
}

export interface Stats {
  round: number;
  labeled: number;
  pending: number;
  pool: number;
  matched_fraction: number;
}

export interface RoundResult {
  auto_negatives: number;
  queued_for_rectify: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? res.statusText;
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  private async checked(res: Response): Promise<Response> {
    if (!res.ok) {
      throw new ApiError(res.status, await parseDetail(res));
    }
    return res;
  }

  /** Next pending pair, or null when the queue is empty (204). */
  async nextPair(): Promise<PairView | null> {
    const res = await fetch(this.url("/api/pairs/next"));
    if (res.status === 204) return null;
    await this.checked(res);
    return (await res.json()) as PairView;
  }

  async labelPair(pairId: string, label: 0 | 1): Promise<void> {
    const res = await fetch(this.url(`/api/pairs/${encodeURIComponent(pairId)}/label`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ label }),
    });
    await this.checked(res);
  }

  async rectifyQueue(limit = 50): Promise<PairView[]> {
    const res = await fetch(this.url(`/api/rectify/queue?limit=${limit}`));
    await this.checked(res);
    return (await res.json()) as PairView[];
  }

  async rectify(pairId: string, label: 0 | 1): Promise<{ provenance: string }> {
    const res = await fetch(this.url(`/api/rectify/${encodeURIComponent(pairId)}`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ label }),
    });
    await this.checked(res);
    return (await res.json()) as { provenance: string };
  }

  async bootstrapRound(n: number, seed: number): Promise<RoundResult> {
    const res = await fetch(this.url("/api/bootstrap/round"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ n, seed }),
    });
    await this.checked(res);
    return (await res.json()) as RoundResult;
  }

  async stats(): Promise<Stats> {
    const res = await fetch(this.url("/api/stats"));
    await this.checked(res);
    return (await res.json()) as Stats;
  }
}
