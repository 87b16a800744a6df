# keeps this directory importable for shared test helpers
