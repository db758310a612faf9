// Topic palette and the special change colors. All topic colors share one
// lightness so no hue dominates and the dark overlays stay readable; the
// special colors are strictly darker than every topic color.

export const TOPIC_LIGHTNESS = 62;
export const SPECIAL_LIGHTNESS = 30;

const TOPIC_HUES = [210, 30, 150, 270, 90, 330, 180, 60, 300, 120];

export function topicColor(colorIndex: number): string {
  const hue = TOPIC_HUES[colorIndex % TOPIC_HUES.length];
  return `hsl(${hue}, 62%, ${TOPIC_LIGHTNESS}%)`;
}

export const SPECIAL_COLORS = {
  added: `hsl(140, 70%, ${SPECIAL_LIGHTNESS}%)`, // dark green: new posts / new terms
  removed: `hsl(0, 75%, ${SPECIAL_LIGHTNESS + 5}%)`, // red: left the window
  moved: `hsl(310, 70%, ${SPECIAL_LIGHTNESS + 5}%)`, // magenta: moved elsewhere
  marker: `hsl(0, 0%, ${SPECIAL_LIGHTNESS}%)`, // dark gray: current source marker
  highlight: "hsl(25, 95%, 55%)", // orange: phrase-intersection highlight
};

export function lightnessOf(hsl: string): number {
  const match = /(\d+(?:\.\d+)?)%\)$/.exec(hsl);
  if (!match) throw new Error(`not an hsl() color: ${hsl}`);
  return parseFloat(match[1]);
}
