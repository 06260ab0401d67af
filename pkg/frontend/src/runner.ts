import type { QueryRequestBody, QueryResponse } from "./types.js";

export interface QueryPort {
  query(body: QueryRequestBody): Promise<QueryResponse>;
}

export interface RunnerSinks {
  onResult: (response: QueryResponse) => void;
  onError: (error: unknown) => void;
}

/** Serializes overlapping queries by sequence number.
 *
 * Every run() gets the next sequence number; when its response lands,
 * it only reaches the sinks if no newer run has started meanwhile.
 * Stale successes and stale failures are both dropped, so the view
 * always reflects the most recent request and nothing older.
 */
export class QueryRunner {
  private sequence = 0;

  constructor(
    private readonly client: QueryPort,
    private readonly sinks: RunnerSinks,
  ) {}

  async run(body: QueryRequestBody): Promise<void> {
    this.sequence += 1;
    const ticket = this.sequence;
    try {
      const response = await this.client.query(body);
      if (ticket === this.sequence) {
        this.sinks.onResult(response);
      }
    } catch (error) {
      if (ticket === this.sequence) {
        this.sinks.onError(error);
      }
    }
  }
}
