"""Prompt assembly: renders a wire-protocol request into chat-style turns.

The scene arrives as a structured JSON object; rendering turns it into a
plain-language bullet list. The rendering layer is deliberately conservative:
every statement in the prompt is read directly off the scene object, and
nothing is inferred or embellished.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class PromptError(ValueError):
    pass


# Five interchangeable phrasings asking the model to pick a decision for the
# active navigation command; the variant index is a configuration choice.
NAVIGATION_PROMPTS = [
    "The navigation command is {command}. Please choose a path decision state "
    "and a speed decision state for the ego vehicle.",
    "Given the navigation command to {command}, please determine a path "
    "decision state and a speed decision state for the ego vehicle.",
    "With the navigation instruction to {command}, please select a path and "
    "speed decision state for the ego vehicle, considering the current "
    "situation.",
    "The navigation command is {command}. Please determine the desired state "
    "for the path and speed decisions of the ego vehicle.",
    "The navigation instruction is to {command}. Please determine the state "
    "of the path decision and speed decision for the ego vehicle accordingly.",
]

# Matching phrasings asking for the reasoning behind the chosen decision.
EXPLANATION_PROMPTS = [
    "Please explain why you chose these decisions.",
    "Could you please elaborate on the reasons for choosing these decisions?",
    "Could you please justify choosing these decisions?",
    "Could you kindly provide a rationale for selecting these decisions?",
    "Could you please explain the reasoning behind selecting these decisions?",
]

NAV_COMMAND_PHRASES = {
    "follow_lane": "follow lane",
    "turn_left": "turn left",
    "turn_right": "turn right",
}


@dataclass
class PromptBundle:
    system: str
    user_turns: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.system:
            raise PromptError("system text must be present")
        if not self.user_turns:
            raise PromptError("at least one user turn is required")

    def messages(self) -> list[dict]:
        """Chat-completion message list."""
        out = [{"role": "system", "content": self.system}]
        out.extend({"role": "user", "content": t} for t in self.user_turns)
        return out

    def flat_text(self) -> str:
        return "\n".join([self.system] + self.user_turns)


def render_scene(scene: dict) -> str:
    """Bullet-list description of the structured scene snapshot."""
    lines = ["Current driving scene:"]
    ego = scene.get("ego", {})
    lane = scene.get("lane", {})
    lines.append(f"- Ego speed: {ego.get('speed', 0.0):.1f} m/s.")
    if lane:
        desc = (f"- Current lane: {lane.get('lane_id', '?')}, "
                f"speed limit {lane.get('speed_limit', 0.0):.1f} m/s.")
        lines.append(desc)
        sides = []
        if lane.get("left"):
            sides.append(f"a left neighbor lane ({lane['left']['boundary_kind']} boundary)")
        if lane.get("right"):
            sides.append(f"a right neighbor lane ({lane['right']['boundary_kind']} boundary)")
        if sides:
            lines.append("- The lane has " + " and ".join(sides) + ".")
        else:
            lines.append("- The lane has no neighbor lanes.")
        if lane.get("in_junction"):
            lines.append("- The ego vehicle is inside a junction.")
        light = lane.get("light_state")
        stop_d = lane.get("stop_line_distance")
        if light is not None and stop_d is not None and stop_d >= 0:
            lines.append(f"- Traffic light: {light}, stop line {stop_d:.1f} m ahead.")
    actors = scene.get("actors", [])
    if actors:
        lines.append("- Nearby road users:")
        for a in actors:
            where = "ahead" if a.get("longitudinal", 0.0) >= 0 else "behind"
            same = "in the same lane" if a.get("same_lane") else "in another lane"
            lines.append(
                f"  * {a.get('kind', 'object')} {a.get('id', '?')}: "
                f"{abs(a.get('longitudinal', 0.0)):.1f} m {where}, {same}, "
                f"speed {a.get('speed', 0.0):.1f} m/s.")
    else:
        lines.append("- No nearby road users.")
    instruction = scene.get("instruction")
    if instruction:
        lines.append(f"- Passenger instruction active: {instruction}")
    return "\n".join(lines)


def render_prompt(request: dict, variant: int = 0,
                  ask_explanation: bool = True) -> PromptBundle:
    """Assemble the chat turns for one planner request frame."""
    if not 0 <= variant < len(NAVIGATION_PROMPTS):
        raise PromptError(f"variant must be in [0, {len(NAVIGATION_PROMPTS)})")
    nav = request.get("navigation_command", "follow_lane")
    if nav not in NAV_COMMAND_PHRASES:
        raise PromptError(f"unknown navigation command {nav!r}")
    turns = [render_scene(request.get("scene", {}))]
    turns.append(NAVIGATION_PROMPTS[variant].format(
        command=NAV_COMMAND_PHRASES[nav]))
    instruction = request.get("user_instruction")
    if instruction:
        turns.append(instruction)
    if ask_explanation:
        turns.append(EXPLANATION_PROMPTS[variant])
    return PromptBundle(system=request["system_message"], user_turns=turns)
