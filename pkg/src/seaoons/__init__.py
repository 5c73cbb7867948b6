"""Parameter-free optimistic online Newton step learners for the SEA model."""
