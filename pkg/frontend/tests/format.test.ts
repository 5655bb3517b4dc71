import { describe, expect, it } from "vitest";

import { escapeHtml, fmt3, meters, osmLink, percent } from "../src/format.js";

describe("display formatting", () => {
  it("rounds to exactly 3 decimals", () => {
    expect(fmt3(31.043903)).toBe("31.044");
    expect(fmt3(0)).toBe("0.000");
    expect(meters(12.2981)).toBe("12.298 m");
  });

  it("renders fractions as percentages", () => {
    expect(percent(0.253)).toBe("25.3%");
  });

  it("builds a map link carrying the exact coordinates", () => {
    const url = osmLink(-6.27, 106.71);
    expect(url).toContain("mlat=-6.27");
    expect(url).toContain("mlon=106.71");
  });

  it("escapes markup in place names", () => {
    expect(escapeHtml('warung <b>"hana"</b> & co')).toBe(
      "warung &lt;b&gt;&quot;hana&quot;&lt;/b&gt; &amp; co",
    );
  });
});
