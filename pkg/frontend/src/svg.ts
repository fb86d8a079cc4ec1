/** Minimal SVG document builder; everything is plain strings, no DOM. */

export interface Attrs {
  [key: string]: string | number;
}

function attrText(attrs: Attrs): string {
  return Object.entries(attrs)
    .map(([k, v]) => `${k}="${v}"`)
    .join(" ");
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  element(tag: string, attrs: Attrs, text?: string): this {
    if (text !== undefined) {
      this.parts.push(`<${tag} ${attrText(attrs)}>${text}</${tag}>`);
    } else {
      this.parts.push(`<${tag} ${attrText(attrs)} />`);
    }
    return this;
  }

  circle(cx: number, cy: number, r: number, attrs: Attrs): this {
    return this.element("circle", { cx, cy, r, ...attrs });
  }

  polygon(points: Array<[number, number]>, attrs: Attrs): this {
    const pts = points.map(([x, y]) => `${x},${y}`).join(" ");
    return this.element("polygon", { points: pts, ...attrs });
  }

  polyline(points: Array<[number, number]>, attrs: Attrs): this {
    const pts = points.map(([x, y]) => `${x},${y}`).join(" ");
    return this.element("polyline", { points: pts, fill: "none", ...attrs });
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs): this {
    return this.element("line", { x1, y1, x2, y2, ...attrs });
  }

  ellipse(cx: number, cy: number, rx: number, ry: number, rotationDeg: number, attrs: Attrs): this {
    return this.element("ellipse", {
      cx: 0,
      cy: 0,
      rx,
      ry,
      transform: `translate(${cx} ${cy}) rotate(${rotationDeg})`,
      ...attrs,
    });
  }

  text(x: number, y: number, content: string, attrs: Attrs = {}): this {
    return this.element("text", { x, y, "font-size": 12, "font-family": "sans-serif", ...attrs }, content);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
        `viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white" />`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}
