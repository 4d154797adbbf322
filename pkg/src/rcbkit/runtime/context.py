"""
Runtime context: provisioning, binding and the inference run loop.

A ``Runtime`` owns one simulated device, its event dispatcher and telemetry.
It is provisioned in two steps, an image of weights (``load_image``) and a
pipeline with its mapping descriptor (``load_plan``), and then serves any
number of ``run`` calls.
"""

from .._errors import RcbkitError
from .._logging import get_logger
from ..compiler.manifest import MappingDescriptor, TensorClass
from ..config.schema import DeviceConfig
from ..hal import regmap
from ..hal.crossing import CrossingDriver
from ..hal.simdev import SimDevice
from ..net.events import EventDispatcher
from ..net.frame import ErrorCode
from ..net.telemetry import Telemetry
from ..rimfs.alloc import Arena, Stage, advance_stage
from ..rimfs.image import RimfsImage
from .binding import BindingTable, PlanError, bind, plan_buffers
from .executor import ExecError, execute_pipeline, stage_ticks

logger = get_logger(__name__)

ARENA_ALIGN = 4096


class ProvisionError(RcbkitError):
    pass


class NotProvisioned(ProvisionError):
    pass


class InputSizeError(RcbkitError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"input is {actual} bytes, model expects {expected}")


class Runtime:
    """
    An inference runtime over a simulated device.

    Parameters
    ----------
    config : DeviceConfig, optional
        Device geometry, memory, cost and cache model.
    crossing_penalty : int, optional
        If set, primitives go through a ``CrossingDriver`` charging this many
        ticks per command.

    Attributes
    ----------
    device : SimDevice
        The simulator; also serves host-side memory access.
    hal : HalDriver
        What the executor drives: the device, or the device behind a crossing.
    """

    def __init__(self, config: DeviceConfig | None = None, crossing_penalty: int | None = None):
        self.config = config or DeviceConfig()
        self.dispatcher = EventDispatcher()
        self.telemetry = Telemetry()
        self.device = SimDevice(self.config, event_sink=self.dispatcher.post)
        self.hal = (
            CrossingDriver(self.device, crossing_penalty)
            if crossing_penalty is not None
            else self.device
        )
        self.image: RimfsImage | None = None
        self.arena: Arena | None = None
        self.rcbs = None
        self.manifest: MappingDescriptor | None = None
        self.plan = None
        self.weights: BindingTable | None = None
        self.regions = {}
        self.last_result = None
        for tile in range(self.device.ntiles):
            self.dispatcher.register_handler(regmap.done_event(tile), self._on_done)
            self.dispatcher.register_handler(regmap.error_event(tile), self._on_error)

    def __repr__(self) -> str:
        state = "ready" if self.ready else ("image" if self.image is not None else "empty")
        return f"Runtime(device={self.device!r}, state={state})"

    @property
    def ready(self) -> bool:
        return self.plan is not None

    def _on_done(self, event):
        self.telemetry.kernels_completed += 1

    def _on_error(self, event):
        logger.bind(event=hex(event.event_id)).warning("kernel error event")
        self.telemetry.record_error(ErrorCode.EXEC)

    # -- provisioning -------------------------------------------------------

    def load_image(self, image: bytes) -> RimfsImage:
        """
        Place an image at the start of global memory, flush it to the DMA view
        and mount it without copying. The remaining memory becomes the arena.

        Any previously loaded plan is dropped.
        """
        size = len(image)
        if size + ARENA_ALIGN > self.config.global_mem_size:
            raise ProvisionError(
                f"image of {size} bytes does not fit {self.config.global_mem_size} bytes of memory"
            )
        self._drop_plan()
        self.image = self.arena = None
        self.device.host_write(regmap.GLOBAL_BASE, image)
        self.hal.flush_cache(regmap.GLOBAL_BASE, size)
        self.image = RimfsImage(self.device.host_memory(regmap.GLOBAL_BASE, size), regmap.GLOBAL_BASE)
        start = -(-(regmap.GLOBAL_BASE + size) // ARENA_ALIGN) * ARENA_ALIGN
        self.arena = Arena(start, regmap.GLOBAL_BASE + self.config.global_mem_size - start)
        logger.info("image loaded: %d files, %d bytes", len(self.image), size)
        return self.image

    def _drop_plan(self):
        if self.arena is not None:
            self.arena.release_all()
        self.rcbs = self.manifest = self.plan = self.weights = None
        self.regions = {}

    def load_plan(self, rcbs, manifest: MappingDescriptor):
        """
        Install a pipeline: plan and materialise its buffers and bind its
        weights to the mounted image.

        Raises
        ------
        NotProvisioned
            If no image is loaded.
        PlanError
            If a weight is missing from the image, a graph input or output is
            not used by any block, or the buffers do not fit.
        """
        if self.image is None:
            raise NotProvisioned("load an image before a plan")
        self._drop_plan()
        rcbs = list(rcbs)
        weights = BindingTable()
        for info in manifest.of_class(TensorClass.WEIGHT):
            if info.tensor_id not in self.image:
                raise PlanError(f"weight {info.tensor_id} is not in the image")
            weights.bind_file(self.image, info.tensor_id)
        plan = plan_buffers(rcbs, manifest, self.arena)
        unplanned = [
            tid
            for tid in (*manifest.inputs, *manifest.outputs)
            if tid not in plan.lifetimes or plan.lifetimes[tid].slot is None
        ]
        if unplanned:
            raise PlanError(f"graph tensors {[hex(t) for t in unplanned]} are not used by any block")
        self.regions = plan.materialize(self.arena)
        self.rcbs, self.manifest, self.plan = rcbs, manifest, plan
        self.weights = weights.freeze()
        logger.info(
            "plan loaded: %d blocks, %d slots, peak %d bytes",
            len(rcbs), len(plan.slots), plan.peak_live_bytes,
        )
        return plan

    def provision(self, model) -> None:
        """Load a CompiledModel's image and plan."""
        self.load_image(model.image)
        self.load_plan(model.rcbs, model.manifest)

    # -- inference ----------------------------------------------------------

    def _advance_all(self, target: Stage):
        for region in set(self.regions.values()):
            advance_stage(region, target)

    def _reset_stages(self):
        for region in set(self.regions.values()):
            while region.live and region.stage is not Stage.FREE:
                advance_stage(region)

    def resolve(self) -> list:
        """Bind the pipeline: weights from the image, activations from the plan."""
        table = self.weights.extended(self.plan.bindings())
        return [bind(rcb, table, self.config) for rcb in self.rcbs]

    def run(self, data: bytes) -> bytes:
        """
        Run one inference.

        Parameters
        ----------
        data : bytes
            The graph inputs concatenated in manifest order.

        Returns
        -------
        bytes
            The graph outputs concatenated in manifest order.

        Raises
        ------
        NotProvisioned
            Without an image and plan.
        InputSizeError
            If ``data`` does not match the declared inputs.
        ExecError, PipelineError
            From execution.
        """
        if not self.ready:
            raise NotProvisioned("no plan loaded")
        expected = self.manifest.input_size()
        if len(data) != expected:
            raise InputSizeError(expected, len(data))

        self._advance_all(Stage.RECEIVE)
        try:
            offset = 0
            for tid in self.manifest.inputs:
                size = self.manifest[tid].size
                self.device.host_write(self.regions[tid].address, data[offset : offset + size])
                offset += size

            resolved = self.resolve()
            self._advance_all(Stage.COMPUTE)
            outputs = {
                tid: (self.regions[tid].address, self.manifest[tid].size)
                for tid in self.manifest.outputs
            }
            result = execute_pipeline(
                resolved, self.plan, self.hal, self.dispatcher,
                outputs=outputs, memory=self.device,
            )
            self._advance_all(Stage.SEND)
        except ExecError:
            self.telemetry.record_error(ErrorCode.EXEC)
            raise
        finally:
            self.dispatcher.dispatch_pending()
            self._reset_stages()

        self.last_result = result
        self.telemetry.record_run(stage_ticks(result.traces))
        self.telemetry.unknown_events = self.dispatcher.unknown
        return b"".join(result.outputs[tid] for tid in self.manifest.outputs)

    def snapshot(self) -> Telemetry:
        self.telemetry.unknown_events = self.dispatcher.unknown
        return self.telemetry
