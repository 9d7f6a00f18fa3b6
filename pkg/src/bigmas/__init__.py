"""Graph-designed multi-agent reasoning over a shared, validated workspace.

Typical offline use::

    from bigmas import generate_instances, oracle_gateway, solve, verify

    inst = generate_instances("game24", 1, seed=0)[0]
    result = solve(inst, oracle_gateway(inst))
    verify(inst, result.answer).correct
"""

from bigmas.baselines import BaselineConfig, BaselineResult, run_base, run_baseline, run_react, run_tot
from bigmas.bench import BenchConfig, RunRecord, compute_metrics, load_records, run_benchmark
from bigmas.config import RunConfig
from bigmas.designer import DesignOutput, DesignResult, default_design, design, parse_design
from bigmas.estimators import BaseLLMSolver, BigmasSolver, ReActSolver, ToTSolver, check_instances
from bigmas.executor import ExecutionResult, execute_node, fallback_resolve, run, solve
from bigmas.gateway import ChatRequest, ChatResponse, GatewayError, HttpGateway, ScriptedGateway, Usage, UsageLedger
from bigmas.graph import AgentGraph, NodeSpec, classify_role, successors, validate_graph
from bigmas.instructions import parse_instruction
from bigmas.orchestrator import RoutingDecision, route
from bigmas.simulate import oracle_gateway
from bigmas.tasks import TaskInstance, Verdict, generate_instances, oracle_solve, render_context, verify
from bigmas.workspace import ValidationResult, Workspace, WriteInstruction, apply_write, init_workspace, validate_write

__version__ = "0.1.0"

__all__ = [
    "AgentGraph",
    "BaseLLMSolver",
    "BaselineConfig",
    "BaselineResult",
    "BenchConfig",
    "BigmasSolver",
    "ChatRequest",
    "ChatResponse",
    "DesignOutput",
    "DesignResult",
    "ExecutionResult",
    "GatewayError",
    "HttpGateway",
    "NodeSpec",
    "ReActSolver",
    "RoutingDecision",
    "RunConfig",
    "RunRecord",
    "ScriptedGateway",
    "TaskInstance",
    "ToTSolver",
    "Usage",
    "UsageLedger",
    "ValidationResult",
    "Verdict",
    "Workspace",
    "WriteInstruction",
    "apply_write",
    "check_instances",
    "classify_role",
    "compute_metrics",
    "default_design",
    "design",
    "execute_node",
    "fallback_resolve",
    "generate_instances",
    "init_workspace",
    "load_records",
    "oracle_gateway",
    "oracle_solve",
    "parse_design",
    "parse_instruction",
    "render_context",
    "route",
    "run",
    "run_base",
    "run_baseline",
    "run_benchmark",
    "run_react",
    "run_tot",
    "solve",
    "successors",
    "validate_graph",
    "validate_write",
    "verify",
]
