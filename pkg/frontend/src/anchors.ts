/** Anchor captions for the -5..+5 sentiment slider, shown as tooltips so
 * coders calibrate against the same wording the model carries. */

export const SENTIMENT_ANCHORS: Record<number, string> = {
  [-5]: "N is a complete disgrace; his actions are unforgivable and heinous.",
  [-4]: "N's policy is catastrophic and shows her incompetence and lack of empathy.",
  [-3]: "N's approach is flawed and disappointing; he must reconsider his stance.",
  [-2]: "N's recent decision was short-sighted and not well-thought-out.",
  [-1]: "N could have done better; the results were somewhat underwhelming.",
  [0]: "N presented the quarterly report as per the schedule.",
  [1]: "N made a decent effort, and there are some signs of improvement.",
  [2]: "N's initiative is somewhat effective; it's a step in the right direction.",
  [3]: "N's leadership has been strong and beneficial to our team.",
  [4]: "N's contribution has been outstanding and transformative for our project.",
  [5]: "N is an extraordinary visionary; their work has revolutionized our understanding and approach.",
};

export function anchorFor(sentiment: number): string {
  return SENTIMENT_ANCHORS[sentiment] ?? "";
}
