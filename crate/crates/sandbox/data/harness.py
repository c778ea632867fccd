"""Frame-capture harness for generated animation scripts.

Usage: python3 -I -B harness.py SCRIPT

Runs SCRIPT with the working directory as its only writable location. Drawing
calls are redirected into frames/%06d.png and a meta.json summary is written
on exit. Exit status is 0 on success, 1 when the script raised.
"""

import json
import os
import sys
import traceback

WORKDIR = os.path.realpath(os.getcwd())
FRAMES_DIR = os.path.join(WORKDIR, "frames")
MAX_FRAMES = int(os.environ.get("BIOMOTION_MAX_FRAMES", "600"))
os.makedirs(FRAMES_DIR, exist_ok=True)
os.environ["MPLBACKEND"] = "Agg"

import numpy as np  # noqa: E402
from PIL import Image, ImageDraw  # noqa: E402
import matplotlib  # noqa: E402

matplotlib.use("Agg")
import matplotlib.animation as _mpl_anim  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

STATE = {"count": 0, "fps": [], "sources": [], "denied": [], "truncated": False}


class Enough(Exception):
    pass


def emit(rgb, fps=None, source="matplotlib"):
    if STATE["count"] >= MAX_FRAMES:
        STATE["truncated"] = True
        raise Enough()
    path = os.path.join(FRAMES_DIR, "%06d.png" % STATE["count"])
    Image.fromarray(np.ascontiguousarray(rgb[..., :3])).save(path)
    STATE["count"] += 1
    if fps:
        STATE["fps"].append(float(fps))
    if source not in STATE["sources"]:
        STATE["sources"].append(source)


def grab_figure(fig, fps=None, source="matplotlib"):
    fig.canvas.draw()
    emit(np.asarray(fig.canvas.buffer_rgba()), fps, source)


# --- matplotlib ---------------------------------------------------------------

ANIMATIONS = []
_orig_anim_init = _mpl_anim.Animation.__init__
_orig_anim_save = _mpl_anim.Animation.save


def _anim_init(self, *args, **kwargs):
    _orig_anim_init(self, *args, **kwargs)
    ANIMATIONS.append(self)


class FrameDump(_mpl_anim.AbstractMovieWriter):
    def __init__(self, fps):
        super().__init__(fps=fps)

    def setup(self, fig, outfile, dpi=None):
        self.fig = fig
        self.outfile = outfile
        self.dpi = dpi

    def grab_frame(self, **savefig_kwargs):
        grab_figure(self.fig, self.fps)

    def finish(self):
        pass


def _anim_fps(anim):
    interval = getattr(anim, "_interval", None)
    try:
        if interval and float(interval) > 0:
            return 1000.0 / float(interval)
    except (TypeError, ValueError):
        pass
    return 30.0


def capture_animation(anim):
    if getattr(anim, "_biomotion_done", False):
        return
    anim._biomotion_done = True
    try:
        _orig_anim_save(anim, os.path.join(WORKDIR, "unused.out"), writer=FrameDump(_anim_fps(anim)))
    except Enough:
        pass


def _anim_save(self, filename=None, *args, **kwargs):
    capture_animation(self)


def _show(*args, **kwargs):
    pending = [a for a in ANIMATIONS if not getattr(a, "_biomotion_done", False)]
    if pending:
        for anim in pending:
            capture_animation(anim)
    elif plt.get_fignums() and STATE["count"] == 0:
        try:
            grab_figure(plt.gcf(), None, "figure")
        except Enough:
            pass


def _pause(interval=0.0):
    if plt.get_fignums():
        fps = 1.0 / interval if interval and interval > 0 else None
        grab_figure(plt.gcf(), fps, "pause")


_mpl_anim.Animation.__init__ = _anim_init
_mpl_anim.Animation.save = _anim_save
plt.show = _show
plt.pause = _pause


# --- pygame -------------------------------------------------------------------

def _install_pygame_shim():
    import types

    pg = types.ModuleType("pygame")
    QUIT, KEYDOWN, KEYUP, MOUSEBUTTONDOWN = 256, 768, 769, 1025
    pg.QUIT, pg.KEYDOWN, pg.KEYUP, pg.MOUSEBUTTONDOWN = QUIT, KEYDOWN, KEYUP, MOUSEBUTTONDOWN
    pg.K_ESCAPE, pg.K_q, pg.K_SPACE = 27, 113, 32
    pg.SRCALPHA, pg.FULLSCREEN, pg.RESIZABLE, pg.DOUBLEBUF, pg.HWSURFACE = 65536, 1, 16, 2, 1
    shim = {"screen": None, "fps": None}

    def rgb(c):
        if isinstance(c, str):
            from PIL import ImageColor
            return ImageColor.getrgb(c)[:3]
        c = tuple(int(v) for v in c)
        return c[:3] if len(c) >= 3 else (c[0], c[0], c[0])

    def xy(p):
        return (float(p[0]), float(p[1]))

    class Rect:
        def __init__(self, *a):
            if len(a) == 1:
                a = tuple(a[0])
            if len(a) == 2:
                a = (a[0][0], a[0][1], a[1][0], a[1][1])
            self.x, self.y, self.w, self.h = (int(v) for v in a)
            self.width, self.height = self.w, self.h

        @property
        def center(self):
            return (self.x + self.w // 2, self.y + self.h // 2)

        def box(self):
            return [self.x, self.y, self.x + self.w - 1, self.y + self.h - 1]

    class Surface:
        def __init__(self, size, flags=0, *args):
            self.size = (int(size[0]), int(size[1]))
            self.image = Image.new("RGB", self.size, (0, 0, 0))
            self.draw = ImageDraw.Draw(self.image)

        def fill(self, color, rect=None):
            if rect is None:
                self.draw.rectangle([0, 0, self.size[0], self.size[1]], fill=rgb(color))
            else:
                self.draw.rectangle(Rect(rect).box(), fill=rgb(color))

        def blit(self, other, dest, *args):
            if isinstance(other, Surface):
                self.image.paste(other.image, (int(dest[0]), int(dest[1])))

        def get_size(self):
            return self.size

        def get_width(self):
            return self.size[0]

        def get_height(self):
            return self.size[1]

        def get_rect(self, **kw):
            return Rect(0, 0, self.size[0], self.size[1])

        def convert(self, *a):
            return self

        convert_alpha = convert

        def set_alpha(self, *a):
            pass

    class Event:
        def __init__(self, type, **kw):
            self.type = type
            self.__dict__.update(kw)

    def flip(*args):
        screen = shim["screen"]
        if screen is None:
            return
        try:
            emit(np.asarray(screen.image), shim["fps"], "pygame")
        except Enough:
            raise SystemExit(0)

    display = types.SimpleNamespace(
        set_mode=lambda size=(640, 480), flags=0, *a, **k: shim.__setitem__("screen", Surface(size)) or shim["screen"],
        set_caption=lambda *a, **k: None,
        get_surface=lambda: shim["screen"],
        flip=flip,
        update=flip,
        init=lambda: None,
        quit=lambda: None,
        Info=lambda: types.SimpleNamespace(current_w=640, current_h=480),
    )

    def circle(surface, color, center, radius, width=0):
        cx, cy = xy(center)
        r = float(radius)
        box = [cx - r, cy - r, cx + r, cy + r]
        if width:
            surface.draw.ellipse(box, outline=rgb(color), width=int(width))
        else:
            surface.draw.ellipse(box, fill=rgb(color))
        return Rect(cx - r, cy - r, 2 * r, 2 * r)

    def line(surface, color, start, end, width=1):
        surface.draw.line([xy(start), xy(end)], fill=rgb(color), width=max(1, int(width)))

    def lines(surface, color, closed, points, width=1):
        pts = [xy(p) for p in points]
        if closed and pts:
            pts.append(pts[0])
        surface.draw.line(pts, fill=rgb(color), width=max(1, int(width)))

    def rect(surface, color, r, width=0, *a, **k):
        box = Rect(r).box()
        if width:
            surface.draw.rectangle(box, outline=rgb(color), width=int(width))
        else:
            surface.draw.rectangle(box, fill=rgb(color))

    def ellipse(surface, color, r, width=0):
        box = Rect(r).box()
        if width:
            surface.draw.ellipse(box, outline=rgb(color), width=int(width))
        else:
            surface.draw.ellipse(box, fill=rgb(color))

    def polygon(surface, color, points, width=0):
        pts = [xy(p) for p in points]
        if width:
            surface.draw.polygon(pts, outline=rgb(color))
        else:
            surface.draw.polygon(pts, fill=rgb(color))

    pg.draw = types.SimpleNamespace(circle=circle, line=line, lines=lines, aaline=line,
                                    aalines=lines, rect=rect, ellipse=ellipse, polygon=polygon)

    class Clock:
        def tick(self, fps=0):
            if fps:
                shim["fps"] = float(fps)
            return int(1000 / fps) if fps else 0

        tick_busy_loop = tick

        def get_fps(self):
            return shim["fps"] or 0.0

    def get_events(*a, **k):
        if STATE["count"] >= MAX_FRAMES:
            return [Event(QUIT)]
        return []

    pg.event = types.SimpleNamespace(get=get_events, poll=lambda: Event(0), pump=lambda: None,
                                     Event=Event, wait=lambda *a: Event(QUIT))
    pg.time = types.SimpleNamespace(Clock=Clock, delay=lambda ms: None, wait=lambda ms: None,
                                    get_ticks=lambda: int(STATE["count"] * 1000 / (shim["fps"] or 30)))

    class Font:
        def __init__(self, *a, **k):
            pass

        def render(self, text, *a, **k):
            return Surface((max(1, 8 * len(str(text))), 16))

        def size(self, text):
            return (8 * len(str(text)), 16)

    pg.font = types.SimpleNamespace(init=lambda: None, Font=Font, SysFont=Font)
    pg.key = types.SimpleNamespace(get_pressed=lambda: [False] * 512)
    pg.mouse = types.SimpleNamespace(get_pos=lambda: (0, 0), get_pressed=lambda: (False, False, False))
    pg.display = display
    pg.Surface = Surface
    pg.Rect = Rect
    pg.init = lambda: (6, 0)
    pg.quit = lambda: None
    pg.locals = pg
    sys.modules["pygame"] = pg
    sys.modules["pygame.locals"] = pg


_install_pygame_shim()


# --- containment --------------------------------------------------------------

_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC
_PATH_EVENTS = {
    "os.remove": (0,), "os.rmdir": (0,), "os.mkdir": (0,), "os.rename": (0, 1),
    "os.link": (0, 1), "os.symlink": (0, 1), "os.chmod": (0,), "os.chown": (0,),
    "os.truncate": (0,), "os.utime": (0,), "shutil.rmtree": (0,), "shutil.copyfile": (1,),
    "shutil.move": (0, 1), "os.mkfifo": (0,), "os.mknod": (0,),
}
_DENIED_PREFIXES = ("socket.", "subprocess.", "os.exec", "os.posix_spawn", "os.spawn",
                    "os.fork", "os.forkpty", "pty.", "ctypes.dlopen", "webbrowser.")
_DENIED_EVENTS = {"os.system", "os.startfile"}
_ALLOWED_FILES = {"/dev/null"}


def _inside(path):
    if isinstance(path, int):
        return True
    if isinstance(path, bytes):
        path = os.fsdecode(path)
    full = os.path.realpath(os.path.join(WORKDIR, os.fspath(path)))
    return full in _ALLOWED_FILES or full == WORKDIR or full.startswith(WORKDIR + os.sep)


def _deny(event, detail):
    STATE["denied"].append("%s %s" % (event, detail))
    raise PermissionError("sandbox: %s denied (%s)" % (event, detail))


def _audit(event, args):
    if event in _DENIED_EVENTS or event.startswith(_DENIED_PREFIXES):
        _deny(event, "")
    if event == "open":
        path, mode, flags = args
        writes = (mode is not None and any(c in mode for c in "wax+")) or (
            isinstance(flags, int) and flags & _WRITE_FLAGS)
        if writes and not _inside(path):
            _deny("open", path)
    elif event == "os.kill":
        if args[0] != os.getpid():
            _deny(event, args[0])
    elif event in _PATH_EVENTS:
        for i in _PATH_EVENTS[event]:
            if i < len(args) and args[i] is not None and not _inside(args[i]):
                _deny(event, args[i])


def write_meta(exit_code, error=None):
    fps = STATE["fps"][-1] if STATE["fps"] else None
    meta = {
        "frame_count": STATE["count"],
        "fps": fps,
        "sources": STATE["sources"],
        "truncated": STATE["truncated"],
        "denied": STATE["denied"],
        "exit_code": exit_code,
        "error": error,
    }
    with open(os.path.join(WORKDIR, "meta.json"), "w") as f:
        json.dump(meta, f)


def main():
    if len(sys.argv) != 2:
        print("usage: harness.py SCRIPT", file=sys.stderr)
        return 2
    path = sys.argv[1]
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        source = f.read()
    sys.argv = [path]
    sys.addaudithook(_audit)
    code, error = 0, None
    try:
        program = compile(source, path, "exec")
        exec(program, {"__name__": "__main__", "__file__": path, "__builtins__": __builtins__})
        _show()
    except Enough:
        pass
    except SystemExit as e:
        if e.code in (None, 0):
            try:
                _show()
            except Enough:
                pass
        else:
            code, error = 1, "SystemExit(%r)" % (e.code,)
    except BaseException as e:  # noqa: B036
        traceback.print_exc()
        code, error = 1, "%s: %s" % (type(e).__name__, e)
    write_meta(code, error)
    return code


if __name__ == "__main__":
    sys.exit(main())
