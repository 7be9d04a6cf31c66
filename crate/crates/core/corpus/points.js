function Point(x, y) {
    this.x = x;
    this.y = y;
    this.add = function add(o) { return new Point(this.x + o.x, this.y + o.y); };
    this.norm1 = function norm1() { return this.x + this.y; };
}

function benchmarkRun() {
    var p = new Point(0, 0);
    var d = new Point(1, 2.5);
    var i = 0;
    while (i < 200) {
        p = p.add(d);
        i = i + 1;
    }
    return p.norm1();
}

print(benchmarkRun());
