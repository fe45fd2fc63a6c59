// Incremental SSE consumption for the assistant chat.
//
// The parser is pure (text chunks in, events out) so tests can drive it
// without a network; openAssistantStream wires it to fetch streaming.

export interface AssistantEvent {
  delta?: string;
  done?: boolean;
  text?: string;
  error?: string;
}

export interface SseParseResult {
  events: AssistantEvent[];
  rest: string;
}

/** Feed one raw chunk plus any leftover buffer; emits completed events. */
export function parseSseChunk(buffer: string, chunk: string): SseParseResult {
  const combined = buffer + chunk;
  const frames = combined.split("\n\n");
  const rest = frames.pop() ?? "";
  const events: AssistantEvent[] = [];
  for (const frame of frames) {
    for (const line of frame.split("\n")) {
      if (!line.startsWith("data:")) continue;
      const payload = line.slice("data:".length).trim();
      if (!payload || payload === "[DONE]") continue;
      try {
        events.push(JSON.parse(payload) as AssistantEvent);
      } catch {
        // skip malformed frames; the terminal event carries the full text
      }
    }
  }
  return { events, rest };
}

/** Accumulates deltas so the chat bubble grows "a" -> "ab" -> ... */
export class StreamingReply {
  text = "";
  done = false;
  error: string | null = null;

  apply(event: AssistantEvent): string {
    if (event.error !== undefined) {
      this.error = event.error;
      this.done = true;
    } else if (event.done) {
      this.done = true;
      if (event.text !== undefined) this.text = event.text;
    } else if (event.delta !== undefined) {
      this.text += event.delta;
    }
    return this.text;
  }
}

export interface StreamHandlers {
  onUpdate: (text: string) => void;
  onDone: (text: string) => void;
  onError: (message: string) => void;
}

export async function openAssistantStream(
  sessionId: string,
  body: Record<string, unknown>,
  handlers: StreamHandlers,
): Promise<void> {
  const response = await fetch(
    `/v1/assistant/sessions/${encodeURIComponent(sessionId)}/messages`,
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    },
  );
  if (!response.ok || response.body === null) {
    handlers.onError(`stream failed: ${response.status}`);
    return;
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  const reply = new StreamingReply();
  let buffer = "";
  for (;;) {
    const { value, done } = await reader.read();
    if (done) break;
    const parsed = parseSseChunk(buffer, decoder.decode(value, { stream: true }));
    buffer = parsed.rest;
    for (const event of parsed.events) {
      handlers.onUpdate(reply.apply(event));
      if (reply.error !== null) {
        handlers.onError(reply.error);
        return;
      }
      if (reply.done) {
        handlers.onDone(reply.text);
        return;
      }
    }
  }
  if (!reply.done) handlers.onError("stream ended unexpectedly");
}
