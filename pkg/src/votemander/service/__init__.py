"""Service layer shared by the HTTP API and the CLI."""
