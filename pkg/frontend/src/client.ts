// Gateway client: plain fetch for commands, a fetch-stream SSE reader for
// events with cursor-based resubscription.

import type { InjectForm, SessionInfo, Snapshot, WireEvent } from "./types.js";

export class GatewayError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function expectOk(response: Response): Promise<unknown> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = (body as { detail?: string }).detail ?? response.statusText;
    throw new GatewayError(response.status, detail);
  }
  return body;
}

export class GatewayClient {
  constructor(public base: string) {}

  async createSession(scenario: string, opts: { mode?: string; speed?: number; seed?: number } = {}): Promise<SessionInfo> {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ scenario, mode: opts.mode ?? "skilled", speed: opts.speed ?? 1.0, seed: opts.seed }),
    });
    return (await expectOk(response)) as SessionInfo;
  }

  async listSessions(): Promise<SessionInfo[]> {
    return (await expectOk(await fetch(`${this.base}/sessions`))) as SessionInfo[];
  }

  async submitTask(sessionId: string, task: { task_type: string; task_name: string; location: string; robot_task_id: string }): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/tasks`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(task),
      }),
    );
  }

  async snapshot(sessionId: string): Promise<Snapshot> {
    return (await expectOk(await fetch(`${this.base}/sessions/${sessionId}/snapshot`))) as Snapshot;
  }

  async record(sessionId: string): Promise<Record<string, unknown>> {
    return (await expectOk(await fetch(`${this.base}/sessions/${sessionId}/record`))) as Record<string, unknown>;
  }

  async postConsent(sessionId: string, robotTaskId: string, command: "continue" | "abort"): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/consent`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ robot_task_id: robotTaskId, command }),
      }),
    );
  }

  async inject(sessionId: string, form: InjectForm): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/sessions/${sessionId}/inject`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          kind: form.kind,
          x: form.x,
          y: form.y,
          label: form.label,
          chemical: form.chemical,
          containment: form.containment,
          unsafe: form.unsafe,
          on_path: form.on_path,
          in_interaction_zone: form.in_interaction_zone,
        }),
      }),
    );
  }

  /**
   * Subscribe to the session event stream from a cursor. Returns a stop
   * function. Reconnects from the last seen sequence number on drop, so no
   * events are skipped or duplicated.
   */
  streamEvents(
    sessionId: string,
    cursor: number,
    onEvent: (event: WireEvent) => void,
    onStatus?: (status: "connected" | "reconnecting" | "stopped") => void,
  ): () => void {
    let stopped = false;
    let lastSeq = cursor;

    const pump = async (): Promise<void> => {
      while (!stopped) {
        try {
          const response = await fetch(
            `${this.base}/sessions/${sessionId}/events?cursor=${lastSeq}`,
            { headers: { accept: "text/event-stream" } },
          );
          if (!response.ok || !response.body) throw new GatewayError(response.status, "stream refused");
          onStatus?.("connected");
          const reader = response.body.getReader();
          const decoder = new TextDecoder();
          let buffer = "";
          while (!stopped) {
            const { done, value } = await reader.read();
            if (done) break;
            buffer += decoder.decode(value, { stream: true });
            let eol = buffer.indexOf("\n");
            while (eol >= 0) {
              const line = buffer.slice(0, eol).trim();
              buffer = buffer.slice(eol + 1);
              if (line.startsWith("data:")) {
                const event = JSON.parse(line.slice(5)) as WireEvent;
                if (event.seq > lastSeq) {
                  lastSeq = event.seq;
                  onEvent(event);
                }
              }
              eol = buffer.indexOf("\n");
            }
          }
          reader.cancel().catch(() => undefined);
        } catch {
          if (stopped) break;
          onStatus?.("reconnecting");
          await new Promise((resolve) => setTimeout(resolve, 300));
        }
      }
      onStatus?.("stopped");
    };

    void pump();
    return () => {
      stopped = true;
    };
  }
}
