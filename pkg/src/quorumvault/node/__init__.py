"""The institution server: storage, sessions, routing, and bindings."""
