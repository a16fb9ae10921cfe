import { describe, expect, it } from "vitest";

import {
  classifierBarsHtml,
  countdownHtml,
  degreeBannerHtml,
  diagnosisPanelHtml,
  escapeHtml,
  transcriptHtml,
} from "../src/render.js";
import type { DiagnosisState } from "../src/state.js";

const uniform = [0.25, 0.25, 0.25, 0.25] as const;

const diagnosis: DiagnosisState = {
  blockIndex: 0,
  final: "severe",
  perClassifier: {
    language: [...uniform],
    audio: [0.7, 0.1, 0.1, 0.1],
    interactivity: [...uniform],
    disfluency: [...uniform],
  },
  votes: ["severe", "severe", "severe", "severe"],
  tieBroken: false,
};

describe("escaping", () => {
  it("neutralizes markup in user text", () => {
    const html = transcriptHtml([
      { who: "user", text: '<script>alert("x")</script> & more' },
    ]);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("&amp; more");
    expect(html).toContain("&quot;x&quot;");
  });

  it("escapes the four html metacharacters", () => {
    expect(escapeHtml('<a href="x">&</a>')).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;",
    );
  });
});

describe("transcript", () => {
  it("sides user and robot turns and tags robot turns", () => {
    const html = transcriptHtml([
      { who: "user", text: "How is the weather?" },
      { who: "robot", text: "It's raining outside.", responseType: "answer" },
    ]);
    expect(html).toContain('class="turn user"');
    expect(html).toContain('class="turn robot"');
    expect(html).toContain('<span class="tag">answer</span>');
    expect(html).toContain("It's raining outside.");
  });

  it("renders nothing for an empty transcript", () => {
    expect(transcriptHtml([])).toBe("");
  });
});

describe("countdown", () => {
  it("shows a quiet listening state when unarmed", () => {
    expect(countdownHtml(null, null)).toContain("listening");
  });

  it("labels stage 1 as a follow-up and shows tenths", () => {
    const html = countdownHtml(3.04, { deadlineS: 5, stage: 1 });
    expect(html).toContain("follow-up in");
    expect(html).toContain("3.0s");
    expect(html).toContain("stage-1");
  });

  it("labels later stages as a new topic", () => {
    expect(countdownHtml(1.2, { deadlineS: 12, stage: 2 })).toContain("new topic in");
    expect(countdownHtml(0, { deadlineS: 17, stage: 3 })).toContain("stage-3");
  });
});

describe("diagnosis panel", () => {
  it("renders one sorted row of bars per classifier", () => {
    const html = classifierBarsHtml(diagnosis.perClassifier);
    const order = ["audio", "disfluency", "interactivity", "language"].map(
      (name) => html.indexOf(`>${name}</div>`),
    );
    expect(order.every((i) => i >= 0)).toBe(true);
    expect([...order].sort((a, b) => a - b)).toEqual(order);
    expect(html).toContain("width:70%");
    expect(html).toContain(">70%<");
    expect((html.match(/>25%</g) ?? []).length).toBe(12);
  });

  it("banners the final degree with its label", () => {
    expect(degreeBannerHtml("severe", false)).toContain("severe");
    expect(degreeBannerHtml("non_ad", false)).toContain("no indication");
    expect(degreeBannerHtml("mild", true)).toContain("tie broken");
    expect(degreeBannerHtml("mild", false)).not.toContain("tie broken");
  });

  it("shows a placeholder before the first block completes", () => {
    expect(diagnosisPanelHtml(null, { showVerdict: true })).toContain(
      "no completed block yet",
    );
  });

  it("shows banner, block index, and bars when the verdict is visible", () => {
    const html = diagnosisPanelHtml(diagnosis, { showVerdict: true });
    expect(html).toContain("severe");
    expect(html).toContain("block 0");
    expect(html).toContain('class="row"');
  });

  it("hides the verdict entirely in participant view", () => {
    const html = diagnosisPanelHtml(diagnosis, { showVerdict: false });
    expect(html).not.toContain("severe");
    expect(html).not.toContain("banner");
    expect(html).not.toContain('class="row"');
    expect(html).toContain("screening active");
    expect(html).toContain("block 1 done");
  });
});
