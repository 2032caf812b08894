import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import CORPUS, family_entries
from upcscan.chain import (
    FACET_ADDRESS, MockChainQuery, QueryError, RpcChainQuery, facet_address_or_zero,
)
from upcscan.core import ZERO_ADDRESS, Selector, parse_address, selector_of

CUT = selector_of("diamondCut((address,uint8,bytes4[])[],address,bytes)")


def test_mock_answers():
    chain = MockChainQuery.from_file(CORPUS / "loupe.jsonl")
    diamond = parse_address(family_entries("diamond")[0]["address"])
    facet = chain.facet_address(diamond, CUT)
    assert not facet.is_zero()
    assert chain.facet_address(diamond, CUT) == facet
    assert chain.facet_address(diamond, Selector("0x12345678")) == ZERO_ADDRESS
    assert chain.facet_address(parse_address("0x" + "01" * 20), CUT) == ZERO_ADDRESS


def test_mock_round_trip(tmp_path):
    chain = MockChainQuery.from_file(CORPUS / "loupe.jsonl")
    chain.save(tmp_path / "l.jsonl")
    assert MockChainQuery.from_file(tmp_path / "l.jsonl").entries == chain.entries


def test_mock_bad_line(tmp_path):
    (tmp_path / "l.jsonl").write_text('{"diamond": "0x12"}\n')
    with pytest.raises(ValueError):
        MockChainQuery.from_file(tmp_path / "l.jsonl")


class _Node(BaseHTTPRequestHandler):
    facet = "0x" + "ab" * 20
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        _Node.seen.append(body)
        data = body["params"][0]["data"]
        if data.startswith(FACET_ADDRESS.value + CUT.value[2:]):
            reply = {"jsonrpc": "2.0", "id": 1, "result": "0x" + _Node.facet[2:].rjust(64, "0")}
        else:
            reply = {"jsonrpc": "2.0", "id": 1, "error": {"code": 3, "message": "execution reverted"}}
        raw = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def node():
    server = HTTPServer(("127.0.0.1", 0), _Node)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_rpc_adapter(node):
    rpc = RpcChainQuery(node, timeout=5)
    diamond = parse_address("0x" + "cd" * 20)
    assert rpc.facet_address(diamond, CUT).value == _Node.facet
    assert rpc.facet_address(diamond, Selector("0x00000001")) == ZERO_ADDRESS
    assert _Node.seen[0]["params"][0]["to"] == diamond.value


def test_unreachable_node_is_zero_with_warning(caplog):
    rpc = RpcChainQuery("http://127.0.0.1:9", timeout=1)
    with pytest.raises(QueryError):
        rpc.facet_address(parse_address("0x" + "cd" * 20), CUT)
    assert facet_address_or_zero(rpc, parse_address("0x" + "cd" * 20), CUT) == ZERO_ADDRESS
    assert "loupe query failed" in caplog.text
