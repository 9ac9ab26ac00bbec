"""Exception hierarchy for crowdnav."""


class CrowdNavError(Exception):
    """Base class for all crowdnav errors."""


class ConfigError(CrowdNavError):
    """Invalid parameter file, override key or experiment spec."""


class ScenarioError(CrowdNavError):
    """Unknown scenario or malformed scenario geometry."""


class IllegalActionError(CrowdNavError, ValueError):
    """Action not in the legal set for the current vehicle state."""


class FieldSolveError(CrowdNavError):
    """Travel-time field could not be computed (e.g. source inside an obstacle)."""


class DeadStateError(CrowdNavError):
    """A path source has no heading to offer at the queried point."""


class RoadmapError(CrowdNavError):
    """Roadmap construction failed to connect start and goal."""


class PathPlanningError(CrowdNavError):
    """Hybrid A* produced no path and no previous path is available."""


class SolverError(CrowdNavError):
    """Tree search could not produce an action."""
