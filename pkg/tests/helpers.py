"""Small scripted clients for unit tests."""
from diffaudit.genpair import GenerationRecord, PromptPair
from diffaudit.llmclient import Completion, RoleConfig, TokenUsage


class Scripted:
    """Client stand-in: replies from a list (cycled) or a callable; records prompts."""

    def __init__(self, replies, role="discriminator"):
        self.replies = replies
        self.prompts = []
        self.metas = []
        self.config = RoleConfig(role, "scripted")
        self.role = role

    def complete(self, prompt, meta=None, **overrides):
        self.prompts.append(prompt)
        self.metas.append(meta)
        if callable(self.replies):
            text = self.replies(prompt)
        else:
            text = self.replies[(len(self.prompts) - 1) % len(self.replies)]
        return Completion(text, TokenUsage(1, 1), "k")


def pairs(n, samples=1, prefix="p"):
    out = []
    for i in range(n):
        pid = f"{prefix}{i:03d}"
        out.append(PromptPair(pid,
                              [GenerationRecord(pid, "M1", f"one {i} {s}", s) for s in range(samples)],
                              [GenerationRecord(pid, "M2", f"two {i} {s}", s) for s in range(samples)]))
    return out
