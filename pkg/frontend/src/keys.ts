// Keyboard bindings: KeyboardEvent.key -> action name. Shipped as an
// editable JSON file next to index.html; anything unreadable there
// falls back to the defaults below.

export type Bindings = Record<string, string>;

export const DEFAULT_BINDINGS: Bindings = {
  ArrowUp: "move_up",
  ArrowDown: "move_down",
  ArrowLeft: "move_left",
  ArrowRight: "move_right",
  " ": "do",
  ".": "noop",
  z: "sleep",
  "1": "place_stone",
  "2": "place_table",
  "3": "place_furnace",
  "4": "place_plant",
  q: "make_wood_pickaxe",
  w: "make_stone_pickaxe",
  e: "make_iron_pickaxe",
  a: "make_wood_sword",
  s: "make_stone_sword",
  d: "make_iron_sword",
};

export function keyToAction(bindings: Bindings, key: string): string | null {
  return Object.prototype.hasOwnProperty.call(bindings, key)
    ? bindings[key]
    : null;
}

/**
 * A usable table binds every announced action exactly once and nothing
 * outside the announced set. Returns the problems, empty when valid.
 */
export function bindingProblems(
  bindings: Bindings,
  actions: string[],
): string[] {
  const problems: string[] = [];
  const bound = Object.values(bindings);
  for (const name of bound) {
    if (!actions.includes(name)) problems.push(`unknown action ${name}`);
  }
  for (const name of actions) {
    const n = bound.filter((b) => b === name).length;
    if (n === 0) problems.push(`action ${name} has no key`);
    if (n > 1) problems.push(`action ${name} bound ${n} times`);
  }
  return problems;
}

export async function loadBindings(url: string): Promise<Bindings> {
  try {
    const res = await fetch(url);
    if (!res.ok) return { ...DEFAULT_BINDINGS };
    const data = (await res.json()) as Bindings;
    return { ...DEFAULT_BINDINGS, ...data };
  } catch {
    return { ...DEFAULT_BINDINGS };
  }
}
