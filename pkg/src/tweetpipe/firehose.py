"""Deterministic mock of a rate-limited tweet search API.

The engine reproduces the two behaviours the crawler has to survive:

* A fixed quota of 450 requests per 15-minute window. Windows are
  aligned to epoch multiples of the span, so every party computing the
  window index from the same clock lands in the same window.
* An optional duplicate pathology on the cursorless endpoint: polling
  again within ``duplicate_window_ms`` of the previous cursorless
  request re-serves the tail of the stream instead of fresh tweets.
  Requests that follow the ``next`` cursor never overlap.

All randomness is seeded, so a given seed always yields the same stream.
An HTTP wrapper exposes the engine on localhost for end-to-end runs; the
``x-virtual-now-ms`` request header lets a client drive the server from
an injected clock so virtual-time runs stay in lockstep.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import corpora
from .clock import SystemClock

log = logging.getLogger(__name__)

RATE_LIMIT_CAPACITY = 450
RATE_WINDOW_MS = 15 * 60 * 1000
MAX_PAGE_SIZE = 100
TOKEN_TTL_MS = 15 * 60 * 1000

DEFAULT_APP_KEY = "demo-key"
DEFAULT_APP_SECRET = "demo-secret"

SEARCH_PATH = "/1.1/search/tweets.json"
RATE_STATUS_PATH = "/rate_limit_status"

_WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


class AuthError(Exception):
    """Credentials missing or wrong."""


class BadTokenError(Exception):
    """Pagination token unknown or expired."""


class RateLimitError(Exception):
    """Window quota exhausted; retry once the window resets."""

    def __init__(self, reset_at_ms: int):
        super().__init__(f"rate limit exceeded, window resets at {reset_at_ms} ms")
        self.reset_at_ms = reset_at_ms


@dataclass(frozen=True)
class Credentials:
    app_key: str = DEFAULT_APP_KEY
    app_secret: str = DEFAULT_APP_SECRET


@dataclass
class RateWindow:
    """Usage inside one fixed window. Boundaries sit at epoch multiples
    of span_ms, never at first use, so they are the same for everyone."""

    window_start_ms: int = 0
    used: int = 0
    capacity: int = RATE_LIMIT_CAPACITY
    span_ms: int = RATE_WINDOW_MS

    def roll(self, now_ms: int) -> None:
        """Reset the counter if now_ms falls in a later window."""
        start = (now_ms // self.span_ms) * self.span_ms
        if start != self.window_start_ms:
            self.window_start_ms = start
            self.used = 0

    def reset_at_ms(self) -> int:
        return self.window_start_ms + self.span_ms


@dataclass
class RawTweet:
    """One synthetic tweet as the API models it, pre-serialization."""

    creation_date: str
    id: int
    lang: str
    location: str
    name: str
    username: str
    text: str
    is_retweet: bool

    def to_status(self) -> dict:
        """Shape the tweet the way the HTTP API serializes it."""
        return {
            "created_at": self.creation_date,
            "id_str": str(self.id),
            "lang": self.lang,
            "user": {
                "location": self.location,
                "name": self.name,
                "screen_name": self.username,
            },
            "text": self.text,
            "retweeted_status_present": self.is_retweet,
        }


@dataclass
class ApiPage:
    tweets: list[RawTweet]
    next_token: str
    remaining: int
    reset_at_ms: int


def format_created_at(ts_ms: int) -> str:
    """Render a millisecond timestamp in the classic tweet date style,
    e.g. 'Sat Sep 07 20:14:03 +0000 2019'. Manual tables keep the output
    independent of the process locale."""
    dt = datetime.fromtimestamp(ts_ms / 1000.0, tz=timezone.utc)
    return (
        f"{_WEEKDAYS[dt.weekday()]} {_MONTHS[dt.month - 1]} {dt.day:02d} "
        f"{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d} +0000 {dt.year}"
    )


class TweetFactory:
    """Seeded generator of plausible raw tweets.

    Ids increase strictly with generation order. A slice of the output
    carries the rough edges the pipeline must handle: empty locations,
    "und" languages, line breaks and even the literal field delimiter
    inside tweet text.
    """

    def __init__(
        self,
        seed: int = 0,
        empty_location_rate: float = 0.15,
        und_lang_rate: float = 0.08,
        retweet_rate: float = 0.30,
    ):
        self._rng = random.Random(seed)
        self._next_id = 1_000_000_000_000_000_000 + self._rng.randrange(10**6)
        self.empty_location_rate = empty_location_rate
        self.und_lang_rate = und_lang_rate
        self.retweet_rate = retweet_rate

    def make(self, now_ms: int) -> RawTweet:
        rng = self._rng
        self._next_id += rng.randrange(1, 1000)

        if rng.random() < self.empty_location_rate:
            # Users leave the profile field blank or fill it with blanks.
            location = rng.choice(("", " ", "   "))
        else:
            location = rng.choice(corpora.LOCATIONS)

        if rng.random() < self.und_lang_rate:
            lang = rng.choice(("und", "und", "und", ""))
        else:
            lang = rng.choice(corpora.LANGS)

        words = rng.choices(corpora.WORDS, k=rng.randrange(5, 13))
        if rng.random() < 0.25:
            words.append("#" + rng.choice(corpora.HASHTAG_WORDS))
        if rng.random() < 0.15:
            words.insert(0, "@" + rng.choice(corpora.USERNAME_STEMS) + str(rng.randrange(100)))
        text = " ".join(words)
        if rng.random() < 0.05:
            cut = rng.randrange(1, len(text))
            text = text[:cut] + "\n" + text[cut:]
        if rng.random() < 0.02:
            text += " <8>"

        return RawTweet(
            creation_date=format_created_at(now_ms),
            id=self._next_id,
            lang=lang,
            location=location,
            name=rng.choice(corpora.FIRST_NAMES) + " " + rng.choice(corpora.LAST_NAMES),
            username=rng.choice(corpora.USERNAME_STEMS) + str(rng.randrange(1, 10**4)),
            text=text,
            is_retweet=rng.random() < self.retweet_rate,
        )


@dataclass
class _Cursor:
    position: int
    expires_at_ms: int


class FirehoseEngine:
    """In-process core of the mock API; the HTTP layer is a thin shim."""

    def __init__(
        self,
        seed: int = 0,
        credentials: Credentials | None = None,
        duplicate_mode: bool = False,
        duplicate_window_ms: int = 1000,
        factory: TweetFactory | None = None,
    ):
        self._credentials = credentials or Credentials()
        self._factory = factory or TweetFactory(seed=seed)
        self.duplicate_mode = duplicate_mode
        self.duplicate_window_ms = duplicate_window_ms
        self._stream: list[RawTweet] = []
        self._cursors: dict[str, _Cursor] = {}
        self._windows: dict[str, RateWindow] = {}
        self._last_cursorless_ms: int | None = None
        self._token_counter = 0
        self._token_salt = f"{seed}:"
        self._lock = threading.Lock()
        self.requests_served = 0
        self.tweets_generated = 0

    def _check_auth(self, creds: Credentials) -> None:
        if creds != self._credentials:
            raise AuthError("bad app key or secret")

    def _window(self, creds: Credentials, now_ms: int) -> RateWindow:
        window = self._windows.setdefault(creds.app_key, RateWindow())
        window.roll(now_ms)
        return window

    def _issue_token(self, position: int, now_ms: int) -> str:
        self._token_counter += 1
        raw = f"{self._token_salt}{self._token_counter}"
        token = hashlib.sha1(raw.encode("ascii")).hexdigest()[:20]
        self._cursors[token] = _Cursor(position=position, expires_at_ms=now_ms + TOKEN_TTL_MS)
        return token

    def _generate(self, n: int, now_ms: int) -> None:
        for _ in range(n):
            self._stream.append(self._factory.make(now_ms))
        self.tweets_generated += n

    def search(
        self,
        credentials: Credentials,
        count: int = MAX_PAGE_SIZE,
        next_token: str | None = None,
        now_ms: int | None = None,
    ) -> ApiPage:
        """Serve one page. Quota is charged before the token is examined,
        so a bad token still burns a request, as on the real service."""
        with self._lock:
            if now_ms is None:
                now_ms = SystemClock().now_ms()
            self._check_auth(credentials)
            window = self._window(credentials, now_ms)
            if window.used >= window.capacity:
                raise RateLimitError(window.reset_at_ms())
            window.used += 1
            if count < 1:
                raise ValueError(f"count must be positive, got {count}")
            count = min(count, MAX_PAGE_SIZE)

            if next_token is not None:
                cursor = self._cursors.get(next_token)
                if cursor is None or now_ms > cursor.expires_at_ms:
                    self._cursors.pop(next_token, None)
                    raise BadTokenError("unknown or expired pagination token")
                start = cursor.position
                shortfall = start + count - len(self._stream)
                if shortfall > 0:
                    self._generate(shortfall, now_ms)
            else:
                stale = (
                    self.duplicate_mode
                    and self._last_cursorless_ms is not None
                    and now_ms - self._last_cursorless_ms < self.duplicate_window_ms
                    and self._stream
                )
                if stale:
                    # Too soon: the stream has not "moved", so the caller
                    # gets the same tail it already saw.
                    start = max(0, len(self._stream) - count)
                else:
                    start = len(self._stream)
                    self._generate(count, now_ms)
                self._last_cursorless_ms = now_ms

            page = self._stream[start : start + count]
            token = self._issue_token(start + len(page), now_ms)
            self.requests_served += 1
            return ApiPage(
                tweets=page,
                next_token=token,
                remaining=window.capacity - window.used,
                reset_at_ms=window.reset_at_ms(),
            )

    def rate_limit_status(
        self, credentials: Credentials, now_ms: int | None = None
    ) -> tuple[int, int]:
        """(remaining, reset_at_ms) for the caller's current window.
        Does not consume quota."""
        with self._lock:
            if now_ms is None:
                now_ms = SystemClock().now_ms()
            self._check_auth(credentials)
            window = self._window(credentials, now_ms)
            return window.capacity - window.used, window.reset_at_ms()


class _Handler(BaseHTTPRequestHandler):
    engine: FirehoseEngine  # set by the server factory

    def log_message(self, fmt, *args):  # keep test output quiet
        log.debug("mock api: " + fmt, *args)

    def _send(self, status: int, payload: dict, headers: dict | None = None) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _credentials(self) -> Credentials:
        return Credentials(
            app_key=self.headers.get("x-app-key", ""),
            app_secret=self.headers.get("x-app-secret", ""),
        )

    def _now_ms(self) -> int | None:
        virtual = self.headers.get("x-virtual-now-ms")
        return int(virtual) if virtual is not None else None

    def do_GET(self):  # noqa: N802 (http.server API)
        parsed = urlparse(self.path)
        try:
            if parsed.path == SEARCH_PATH:
                self._do_search(parse_qs(parsed.query))
            elif parsed.path == RATE_STATUS_PATH:
                self._do_rate_status()
            else:
                self._send(404, {"error": "not found"})
        except AuthError as exc:
            self._send(401, {"error": str(exc)})
        except RateLimitError as exc:
            self._send(
                429,
                {"error": str(exc), "reset_at_ms": exc.reset_at_ms},
                headers={"x-rate-limit-remaining": "0",
                         "x-rate-limit-reset-ms": str(exc.reset_at_ms)},
            )
        except (BadTokenError, ValueError) as exc:
            self._send(400, {"error": str(exc)})

    def _do_search(self, params: dict) -> None:
        count = int(params.get("count", [str(MAX_PAGE_SIZE)])[0])
        token = params.get("next", [None])[0]
        page = self.engine.search(
            self._credentials(), count=count, next_token=token, now_ms=self._now_ms()
        )
        self._send(
            200,
            {"statuses": [t.to_status() for t in page.tweets], "next": page.next_token},
            headers={"x-rate-limit-remaining": str(page.remaining),
                     "x-rate-limit-reset-ms": str(page.reset_at_ms)},
        )

    def _do_rate_status(self) -> None:
        remaining, reset_at = self.engine.rate_limit_status(
            self._credentials(), now_ms=self._now_ms()
        )
        self._send(200, {"remaining": remaining, "reset_at_ms": reset_at})


class MockFirehoseServer:
    """Serve a FirehoseEngine on an ephemeral localhost port.

    Usable as a context manager:

        with MockFirehoseServer(engine) as server:
            run_crawl(CrawlConfig(endpoint=server.url, ...), clock)
    """

    def __init__(self, engine: FirehoseEngine, host: str = "127.0.0.1", port: int = 0):
        self.engine = engine
        self._host = host
        self._port = port
        self._httpd: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        if self._httpd is None:
            raise RuntimeError("server not started")
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockFirehoseServer":
        handler = type("BoundHandler", (_Handler,), {"engine": self.engine})
        self._httpd = ThreadingHTTPServer((self._host, self._port), handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        log.info("mock api listening on %s", self.url)
        return self

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "MockFirehoseServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
