# -*- coding: utf-8 -*-

"""Registry
"""


class AttentionRegistry(object):
    def __init__(self):
        self._attention_list = {}

    def register(self, kind, attention_class):
        self._attention_list[kind] = attention_class

    def __getitem__(self, index):
        return self._attention_list.get(index)

    def kinds(self):
        return sorted(self._attention_list)


class AgentRegistry(object):
    def __init__(self):
        self._agent_list = {}

    def register(self, architecture, speaker_class, listener_class):
        self._agent_list[architecture] = (speaker_class, listener_class)

    def __getitem__(self, index):
        return self._agent_list.get(index)

    def architectures(self):
        return sorted(self._agent_list)


attention_registry = AttentionRegistry()
agent_registry = AgentRegistry()
