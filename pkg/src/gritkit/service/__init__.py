"""HTTP serving layer; see gritkit.service.app."""
