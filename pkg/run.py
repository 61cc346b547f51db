from entverify import create_app

app = create_app()


def main():
    app()


if __name__ == "__main__":
    main()
