"""Hybrid guidance: cycle the guiding space in control on every collision."""

from __future__ import annotations

from ..guidance import GuidingSpace


class HybridGuidance(GuidingSpace):
    """Delegates selection to ``members[active]``.

    Every failure is reported to all members, so the ones not in control keep
    their state current, and then control passes to the next member. A single
    member is allowed and behaves exactly like that member alone.
    """

    def __init__(self, members: list[GuidingSpace]):
        if len(members) < 1:
            raise ValueError("hybrid guidance needs at least one member")
        super().__init__(members[0].cs, members[0].task)
        self.members = list(members)
        self.active = 0
        self.active_history: list[int] = []
        self.name = "hybrid:" + "+".join(m.name for m in self.members)

    def select(self, tree, task, rng):
        self.active_history.append(self.active)
        return self.members[self.active].select(tree, task, rng)

    def expand(self, selected, target):
        return self.members[self.active].expand(selected, target)

    def on_success(self, tree, new_node):
        for m in self.members:
            m.on_success(tree, new_node)

    def on_failure(self, tree, node, attempted, invalid_pose):
        for m in self.members:
            m.on_failure(tree, node, attempted, invalid_pose)
        self.active = (self.active + 1) % len(self.members)

    def params(self):
        return {m.name: m.params() for m in self.members}
