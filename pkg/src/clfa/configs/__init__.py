# DOC: built-in training profiles, loaded through importlib.resources
