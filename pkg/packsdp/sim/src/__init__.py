# Instance generator: config, generators, and the simulate entrypoint.
